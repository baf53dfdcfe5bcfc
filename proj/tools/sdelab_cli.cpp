// Command-line runner for the simulation lab: discrete optimizer runs, SDE
// surrogate integration, weak-order measurement, stability scans, bound
// certification, and the named experiment protocols.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sdelab/bounds_config.hpp"
#include "sdelab/csv.hpp"
#include "sdelab/experiment.hpp"
#include "sdelab/repro.hpp"
#include "sdelab/sde.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitCheckFailed = 3;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  return out;
}

int cmd_run(const std::string& config_path, std::string output,
            unsigned threads) {
  const sdelab::Config cfg = sdelab::Config::from_file(config_path);
  const sdelab::Experiment e = sdelab::build_experiment(cfg);
  if (output.empty()) output = e.output_path.empty() ? "run.csv" : e.output_path;
  const auto records = sdelab::run_variant(cfg, threads);

  auto out = open_output(output);
  cfg.write_echo(out);
  out << "run_id,step,time,loss,grad_norm_sq,lr_eff,g_hat,status\n";
  long diverged = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    sdelab::write_trajectory_rows(out, records[r], r);
    diverged += records[r].diverged();
  }
  const auto curve = sdelab::mean_curve(records);
  std::cout << "run: runs=" << records.size() << " diverged=" << diverged
            << " final_mean_grad_norm_sq=" << curve.mean_grad_norm_sq.back()
            << " -> " << output << "\n";
  return 0;
}

int cmd_sde(const std::string& config_path, std::string output,
            unsigned threads) {
  const sdelab::Config cfg = sdelab::Config::from_file(config_path);
  sdelab::SdeExperiment e = sdelab::build_sde_experiment(cfg);
  if (output.empty()) output = e.output_path.empty() ? "sde.csv" : e.output_path;

  std::vector<sdelab::TrajectoryRecord> records(e.runs);
  sdelab::rng::Stream init(e.seed, 0, 0, sdelab::rng::Purpose::kInit);
  const sdelab::Vec x0 =
      e.x0 ? *e.x0 : e.model.objective().initial_point(init);
  sdelab::parallel_for(
      e.runs, threads ? threads : sdelab::default_threads(), [&](long r) {
        records[r] = sdelab::integrate(e.model, x0, e.scheduler, e.dt, e.t_end,
                                       e.seed, static_cast<std::uint64_t>(r),
                                       e.divergence_threshold, e.record_stride);
      });

  auto out = open_output(output);
  cfg.write_echo(out);
  out << "run_id,step,time,loss,grad_norm_sq,lr_eff,g_hat,status\n";
  long diverged = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    sdelab::write_trajectory_rows(out, records[r], r);
    diverged += records[r].diverged();
  }
  std::cout << "sde: runs=" << records.size() << " diverged=" << diverged
            << " -> " << output << "\n";
  return 0;
}

int cmd_weak_order(const std::string& config_path, std::string output,
                   const std::string& family_name, const std::string& g_name,
                   std::vector<double> etas, double horizon, long samples,
                   unsigned threads) {
  const sdelab::Config cfg = sdelab::Config::from_file(config_path);
  const sdelab::Experiment e = sdelab::build_experiment(cfg);
  if (output.empty()) output = "weak_order.csv";
  if (etas.empty()) etas = {0.05, 0.1, 0.2, 0.4};

  const sdelab::SdeFamily family = sdelab::parse_sde_family(family_name);
  sdelab::SdeAlgorithm sde_alg = sdelab::SdeAlgorithm::kSgd;
  if (e.algorithm == sdelab::Algorithm::kDcsgd)
    sde_alg = sdelab::SdeAlgorithm::kDcsgd;
  else if (e.algorithm == sdelab::Algorithm::kDsignsgd)
    sde_alg = sdelab::SdeAlgorithm::kDsignsgd;
  const sdelab::TestFunction g = g_name == "loss"
                                     ? sdelab::TestFunction::kLoss
                                     : sdelab::TestFunction::kNormSq;

  const auto report = sdelab::weak_order(e.run, e.algorithm, family, sde_alg,
                                         etas, horizon, g, samples, threads);
  auto out = open_output(output);
  cfg.write_echo(out);
  out << "eta,error,ci,slope\n";
  for (const auto& p : report.points)
    out << sdelab::format_double(p.eta) << ','
        << sdelab::format_double(p.error) << ',' << sdelab::format_double(p.ci)
        << ',' << sdelab::format_double(report.slope) << "\n";
  std::cout << "weak-order: slope=" << report.slope
            << " stderr=" << report.slope_stderr
            << (report.conclusive ? "" : " (inconclusive)") << " -> " << output
            << "\n";
  return 0;
}

int cmd_stability_scan(const std::string& config_path, std::string output,
                       std::vector<double> etas, std::vector<double> x0s,
                       unsigned threads) {
  const sdelab::Config cfg = sdelab::Config::from_file(config_path);
  const sdelab::Experiment e = sdelab::build_experiment(cfg);
  if (output.empty()) output = "stability.csv";
  if (etas.empty()) etas = {1.0, 1.5, 1.9, 2.1, 2.5, 3.0};
  if (x0s.empty()) x0s = {1.0};

  const auto cells = sdelab::stability_scan(e.run, e.algorithm, etas, x0s, threads);
  auto out = open_output(output);
  cfg.write_echo(out);
  out << "eta,x0,status\n";
  for (const auto& c : cells)
    out << sdelab::format_double(c.eta) << ',' << sdelab::format_double(c.x0)
        << ','
        << (c.status == sdelab::StabilityStatus::kDiverged ? "diverged"
                                                           : "converged")
        << "\n";
  std::cout << "stability-scan: " << cells.size() << " cells -> " << output
            << "\n";
  return 0;
}

int cmd_bound_check(const std::string& config_path, std::string output,
                    const std::string& bound, std::vector<double> times,
                    long samples, double g_proxy, unsigned threads) {
  const sdelab::Config cfg = sdelab::Config::from_file(config_path);
  const sdelab::SdeExperiment e = sdelab::build_sde_experiment(cfg);
  if (output.empty()) output = "bound_check.csv";
  if (times.empty()) times = {1.0, 10.0, 100.0};

  const sdelab::BoundId id = sdelab::parse_bound_id(bound);
  const sdelab::ProblemConstants consts = sdelab::problem_constants_from(cfg);
  sdelab::rng::Stream init(e.seed, 0, 0, sdelab::rng::Purpose::kInit);
  const sdelab::Vec x0 =
      e.x0 ? *e.x0 : e.model.objective().initial_point(init);
  if (g_proxy < 0.0) g_proxy = e.model.objective().gradient(x0).norm();

  const auto report = sdelab::bound_curve(id, consts, e.model, x0, e.scheduler,
                                          times, samples, e.seed, g_proxy,
                                          threads);
  auto out = open_output(output);
  cfg.write_echo(out);
  out << "t,rhs,empirical,ci,satisfied\n";
  for (const auto& p : report.points)
    out << sdelab::format_double(p.t) << ',' << sdelab::format_double(p.rhs)
        << ',' << sdelab::format_double(p.empirical) << ','
        << sdelab::format_double(p.ci) << ',' << (p.satisfied ? 1 : 0) << "\n";
  std::cout << "bound-check: " << bound
            << " constraint=" << report.constraint
            << (report.satisfied ? " satisfied" : " NOT satisfied") << " -> "
            << output << "\n";
  return report.satisfied ? 0 : kExitCheckFailed;
}

int cmd_repro(const std::string& name, const std::string& outdir,
              unsigned threads, bool list) {
  if (list) {
    for (const auto& e : sdelab::repro_registry())
      std::cout << e.name << ": " << e.description << "\n";
    for (const auto& [g, members] : sdelab::repro_groups()) {
      std::cout << g << ":";
      for (const auto& m : members) std::cout << " " << m;
      std::cout << "\n";
    }
    return 0;
  }

  std::vector<std::string> names;
  const auto groups = sdelab::repro_groups();
  if (const auto it = groups.find(name); it != groups.end())
    names = it->second;
  else
    names = {name};

  std::filesystem::create_directories(outdir);
  int rc = 0;
  for (const auto& entry_name : names) {
    const auto& entry = sdelab::find_registry_entry(entry_name);
    const bool expects_divergence =
        entry_name.find("diverge") != std::string::npos;
    for (const auto& variant : entry.variants) {
      const auto records = sdelab::run_variant(variant.config, threads);
      const std::string path =
          outdir + "/" + entry.name + "-" + variant.label + ".csv";
      auto out = open_output(path);
      variant.config.write_echo(out);
      out << "run_id,step,time,loss,grad_norm_sq,lr_eff,g_hat,status\n";
      long diverged = 0;
      for (std::size_t r = 0; r < records.size(); ++r) {
        sdelab::write_trajectory_rows(out, records[r], r);
        diverged += records[r].diverged();
      }
      const auto curve = sdelab::mean_curve(records);
      std::cout << entry.name << "/" << variant.label
                << ": runs=" << records.size() << " diverged=" << diverged
                << " final_mean_grad_norm_sq="
                << curve.mean_grad_norm_sq.back() << " -> " << path << "\n";
      if (!expects_divergence && diverged > 0) {
        std::cerr << entry.name << "/" << variant.label
                  << ": unexpected divergence in a convergent protocol\n";
        rc = kExitCheckFailed;
      }
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation lab for distributed compressed SGD, sign SGD, and "
               "their SDE surrogates"};
  app.require_subcommand(1);

  std::string config_path, output, outdir = ".";
  std::string family = "corrected-first", g_name = "norm-sq";
  std::string bound = "dsgd-corrected", repro_name;
  std::vector<double> etas, x0s, times;
  double horizon = 1.0, g_proxy = -1.0;
  long samples = 10000;
  unsigned threads = 0;
  bool list = false;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config)
      sub->add_option("--config", config_path, "key = value configuration file")
          ->required();
    sub->add_option("--output", output, "output CSV path");
    sub->add_option("--threads", threads, "worker threads (0 = hardware)");
  };

  auto* run_cmd = app.add_subcommand("run", "discrete optimizer runs");
  add_common(run_cmd);

  auto* sde_cmd = app.add_subcommand("sde", "integrate the SDE surrogate");
  add_common(sde_cmd);

  auto* weak_cmd =
      app.add_subcommand("weak-order", "measure the weak-approximation order");
  add_common(weak_cmd);
  weak_cmd->add_option("--family", family,
                       "classic-first | classic-second | corrected-first");
  weak_cmd->add_option("--etas", etas, "stepsize grid")->delimiter(',');
  weak_cmd->add_option("--T", horizon, "time horizon");
  weak_cmd->add_option("--samples", samples, "Monte Carlo sample count");
  weak_cmd->add_option("--g", g_name, "test function: norm-sq | loss");

  auto* scan_cmd = app.add_subcommand("stability-scan",
                                      "classify (eta, x0) cells");
  add_common(scan_cmd);
  scan_cmd->add_option("--etas", etas, "stepsize grid")->delimiter(',');
  scan_cmd->add_option("--x0s", x0s, "starting-point grid")->delimiter(',');

  auto* bound_cmd = app.add_subcommand(
      "bound-check", "certify a convergence bound against SDE trajectories");
  add_common(bound_cmd);
  bound_cmd->add_option("--bound", bound, "bound id (see README)");
  bound_cmd->add_option("--times", times, "time grid")->delimiter(',');
  bound_cmd->add_option("--samples", samples, "Monte Carlo sample count");
  bound_cmd->add_option("--g-proxy", g_proxy,
                        "gradient-norm proxy (< 0: use |grad f(x0)|)");

  auto* repro_cmd =
      app.add_subcommand("repro", "run a named experiment protocol");
  repro_cmd->add_option("name", repro_name, "protocol or group name");
  repro_cmd->add_option("--outdir", outdir, "output directory");
  repro_cmd->add_option("--threads", threads, "worker threads");
  repro_cmd->add_flag("--list", list, "list protocols and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(config_path, output, threads);
    if (sde_cmd->parsed()) return cmd_sde(config_path, output, threads);
    if (weak_cmd->parsed())
      return cmd_weak_order(config_path, output, family, g_name, etas, horizon,
                            samples, threads);
    if (scan_cmd->parsed())
      return cmd_stability_scan(config_path, output, etas, x0s, threads);
    if (bound_cmd->parsed())
      return cmd_bound_check(config_path, output, bound, times, samples,
                             g_proxy, threads);
    if (repro_cmd->parsed()) {
      if (!list && repro_name.empty()) {
        std::cerr << "repro: protocol name required (or --list)\n";
        return kExitConfigError;
      }
      return cmd_repro(repro_name, outdir, threads, list);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitConfigError;
  }
  return 0;
}

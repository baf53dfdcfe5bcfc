#pragma once

#include <set>
#include <string>
#include <vector>

#include "sdelab/analysis.hpp"
#include "sdelab/config.hpp"
#include "sdelab/optimizers.hpp"
#include "sdelab/sde.hpp"

namespace sdelab {

// Configuration-key vocabulary; anything outside is rejected up front.
inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "objective.kind", "objective.dim", "objective.lambda", "objective.seed",
      "noise.kind", "noise.sigma0", "noise.sigma1", "noise.nu", "noise.scale",
      "compressor.kind", "compressor.p",
      "scheduler.kind", "scheduler.a", "scheduler.eps", "scheduler.L0",
      "scheduler.L1", "scheduler.form",
      "run.algorithm", "run.eta", "run.steps", "run.clients", "run.seed",
      "run.runs", "run.record-stride", "run.divergence-threshold", "run.x0",
      "run.threads",
      "sde.family", "sde.algorithm", "sde.dt", "sde.T",
      "output.path",
  };
  return keys;
}

inline Objective parse_objective(const Config& cfg) {
  const std::string kind = cfg.get("objective.kind");
  if (kind == "quadratic")
    return Objective::quadratic(cfg.get_double_or("objective.lambda", 1.0),
                                static_cast<int>(cfg.get_long_or("objective.dim", 1)));
  if (kind == "quartic1d") return Objective::quartic1d();
  if (kind == "quartic-sum")
    return Objective::quartic_sum(static_cast<int>(cfg.get_long_or("objective.dim", 1000)));
  if (kind == "mlp")
    return Objective::mlp_regression(
        static_cast<std::uint64_t>(cfg.get_long_or("objective.seed", 0)));
  throw std::runtime_error("config: unknown objective.kind `" + kind + "`");
}

inline NoiseSpec parse_noise(const Config& cfg, int dim) {
  const std::string kind = cfg.get_or("noise.kind", "none");
  if (kind == "none") return NoiseSpec::none();
  if (kind == "gaussian-affine")
    return NoiseSpec::gaussian_affine(cfg.get_double_or("noise.sigma0", 0.0),
                                      cfg.get_double_or("noise.sigma1", 0.0));
  if (kind == "student-t")
    return NoiseSpec::student_t_iso(cfg.get_double("noise.nu"),
                                    cfg.get_double("noise.scale"), dim);
  throw std::runtime_error("config: unknown noise.kind `" + kind + "`");
}

inline CompressorSpec parse_compressor(const Config& cfg) {
  const std::string kind = cfg.get_or("compressor.kind", "identity");
  if (kind == "identity") return CompressorSpec::identity();
  if (kind == "random-sparsify")
    return CompressorSpec::random_sparsify(cfg.get_double("compressor.p"));
  if (kind == "sign") return CompressorSpec::sign();
  throw std::runtime_error("config: unknown compressor.kind `" + kind + "`");
}

// Client-averaged noise/compression moments feeding the normalized stepsize.
inline NormalizationParams normalization_from_clients(
    const std::vector<ClientSpec>& clients, int dim, double eps, double l0,
    double l1, NormalizationParams::Form form) {
  NormalizationParams p;
  p.eps = eps;
  p.l0 = l0;
  p.l1 = l1;
  p.clients = static_cast<int>(clients.size());
  p.dim = dim;
  p.form = form;
  for (const auto& c : clients) {
    const double omega = c.compressor.kind == CompressorSpec::Kind::kSign
                             ? 0.0
                             : omega_of(c.compressor);
    const double s0sq = c.noise.sigma0 * c.noise.sigma0;
    const double s1sq = c.noise.sigma1 * c.noise.sigma1;
    p.omega_bar += omega;
    p.sigma0sq_bar += s0sq;
    p.sigma1sq_bar += s1sq;
    p.sigma0sq_omega_bar += s0sq * omega;
    p.sigma1sq_omega_bar += s1sq * omega;
  }
  const double n = static_cast<double>(clients.size());
  p.omega_bar /= n;
  p.sigma0sq_bar /= n;
  p.sigma1sq_bar /= n;
  p.sigma0sq_omega_bar /= n;
  p.sigma1sq_omega_bar /= n;
  return p;
}

inline SchedulerSpec parse_scheduler(const Config& cfg,
                                     const std::vector<ClientSpec>& clients,
                                     int dim) {
  const std::string kind = cfg.get_or("scheduler.kind", "constant");
  if (kind == "constant") return SchedulerSpec::constant();
  if (kind == "power-law")
    return SchedulerSpec::power_law(cfg.get_double("scheduler.a"));
  if (kind == "inverse-sqrt-step") return SchedulerSpec::inverse_sqrt_step();
  if (kind == "adaptive-normalized") {
    const std::string form_name = cfg.get_or("scheduler.form", "eq12");
    NormalizationParams::Form form;
    if (form_name == "eq12" || form_name == "full")
      form = NormalizationParams::Form::kFull;
    else if (form_name == "simple")
      form = NormalizationParams::Form::kSimple;
    else
      throw std::runtime_error("config: unknown scheduler.form `" + form_name + "`");
    return SchedulerSpec::adaptive_normalized(normalization_from_clients(
        clients, dim, cfg.get_double_or("scheduler.eps", 0.5),
        cfg.get_double_or("scheduler.L0", 1.0),
        cfg.get_double_or("scheduler.L1", 1.0), form));
  }
  throw std::runtime_error("config: unknown scheduler.kind `" + kind + "`");
}

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "dsgd") return Algorithm::kDsgd;
  if (name == "dcsgd") return Algorithm::kDcsgd;
  if (name == "dsignsgd") return Algorithm::kDsignsgd;
  if (name == "normalized-dcsgd") return Algorithm::kNormalizedDcsgd;
  throw std::runtime_error("config: unknown run.algorithm `" + name + "`");
}

struct Experiment {
  RunConfig run;
  Algorithm algorithm = Algorithm::kDcsgd;
  long runs = 1;
  unsigned threads = 0;
  std::string output_path;
};

inline Experiment build_experiment(const Config& cfg) {
  cfg.require_known(known_keys());
  Objective obj = parse_objective(cfg);
  const int dim = obj.dimension();
  const long n_clients = cfg.get_long_or("run.clients", 1);
  if (n_clients < 1) throw std::runtime_error("config: run.clients must be >= 1");

  std::vector<ClientSpec> clients(
      static_cast<std::size_t>(n_clients),
      ClientSpec{parse_noise(cfg, dim), parse_compressor(cfg)});

  Experiment e;
  e.run.objective = std::move(obj);
  e.run.scheduler = parse_scheduler(cfg, clients, dim);
  e.run.clients = std::move(clients);
  e.run.eta = cfg.get_double_or("run.eta", 0.1);
  e.run.steps = cfg.get_long_or("run.steps", 100);
  e.run.seed = static_cast<std::uint64_t>(cfg.get_long_or("run.seed", 0));
  e.run.divergence_threshold = cfg.get_double_or("run.divergence-threshold", 1e12);
  e.run.record_stride = cfg.get_long_or("run.record-stride", 1);
  if (cfg.has("run.x0"))
    e.run.x0 = Vec::Constant(dim, cfg.get_double("run.x0"));
  e.algorithm = parse_algorithm(cfg.get_or("run.algorithm", "dcsgd"));
  e.runs = cfg.get_long_or("run.runs", 1);
  e.threads = static_cast<unsigned>(cfg.get_long_or("run.threads", 0));
  e.output_path = cfg.get_or("output.path", "");
  return e;
}

struct SdeExperiment {
  SdeModel model;
  SchedulerSpec scheduler;
  double dt = 1e-3;
  double t_end = 1.0;
  std::uint64_t seed = 0;
  long runs = 1;
  double divergence_threshold = 1e12;
  long record_stride = 1;
  std::optional<Vec> x0;
  unsigned threads = 0;
  std::string output_path;
};

inline SdeFamily parse_sde_family(const std::string& name) {
  if (name == "classic-first") return SdeFamily::kClassicFirst;
  if (name == "classic-second") return SdeFamily::kClassicSecond;
  if (name == "corrected-first") return SdeFamily::kCorrectedFirst;
  throw std::runtime_error("config: unknown sde.family `" + name + "`");
}

inline SdeAlgorithm parse_sde_algorithm(const std::string& name) {
  if (name == "sgd") return SdeAlgorithm::kSgd;
  if (name == "dcsgd") return SdeAlgorithm::kDcsgd;
  if (name == "dsignsgd") return SdeAlgorithm::kDsignsgd;
  throw std::runtime_error("config: unknown sde.algorithm `" + name + "`");
}

inline SdeExperiment build_sde_experiment(const Config& cfg) {
  cfg.require_known(known_keys());
  Objective obj = parse_objective(cfg);
  const int dim = obj.dimension();
  const long n_clients = cfg.get_long_or("run.clients", 1);
  std::vector<ClientSpec> clients(
      static_cast<std::size_t>(n_clients),
      ClientSpec{parse_noise(cfg, dim), parse_compressor(cfg)});

  const double eta = cfg.get_double_or("run.eta", 0.1);
  SdeExperiment e{
      SdeModel(parse_sde_family(cfg.get_or("sde.family", "corrected-first")),
               parse_sde_algorithm(cfg.get_or("sde.algorithm", "sgd")),
               std::move(obj), clients, eta),
      parse_scheduler(cfg, clients, dim)};
  e.dt = cfg.get_double_or("sde.dt", eta / 50.0);
  e.t_end = cfg.get_double_or("sde.T", 1.0);
  e.seed = static_cast<std::uint64_t>(cfg.get_long_or("run.seed", 0));
  e.runs = cfg.get_long_or("run.runs", 1);
  e.divergence_threshold = cfg.get_double_or("run.divergence-threshold", 1e12);
  e.record_stride = cfg.get_long_or("run.record-stride", 1);
  if (cfg.has("run.x0"))
    e.x0 = Vec::Constant(dim, cfg.get_double("run.x0"));
  e.threads = static_cast<unsigned>(cfg.get_long_or("run.threads", 0));
  e.output_path = cfg.get_or("output.path", "");
  return e;
}

}  // namespace sdelab

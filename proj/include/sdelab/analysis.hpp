#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdelab/optimizers.hpp"
#include "sdelab/parallel.hpp"
#include "sdelab/sde.hpp"
#include "sdelab/schedulers.hpp"

namespace sdelab {

// ---------------------------------------------------------------------------
// Weak-approximation order measurement
// ---------------------------------------------------------------------------

enum class TestFunction { kNormSq, kLoss };

inline double eval_test_function(TestFunction g, const Objective& obj,
                                 const Vec& x) {
  return g == TestFunction::kNormSq ? x.squaredNorm() : obj.loss(x);
}

struct WeakOrderPoint {
  double eta = 0.0;
  double error = 0.0;  // |E g(x_K) - E g(X_{K eta})|
  double ci = 0.0;     // 95% Monte Carlo half-width of the difference
  bool usable = false; // CI excludes zero
};

struct WeakOrderReport {
  std::vector<WeakOrderPoint> points;
  double slope = 0.0;
  double slope_stderr = 0.0;
  bool conclusive = false;
  TestFunction test_function = TestFunction::kNormSq;
};

namespace detail {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};

inline MeanVar mean_var(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? s / (n - 1.0) : 0.0};
}

// Weighted least squares of y on x; returns slope and its standard error.
inline std::pair<double, double> wls_slope(const std::vector<double>& x,
                                           const std::vector<double>& y,
                                           const std::vector<double>& w) {
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
    swxx += w[i] * x[i] * x[i];
    swxy += w[i] * x[i] * y[i];
  }
  const double det = sw * swxx - swx * swx;
  const double slope = (sw * swxy - swx * swy) / det;
  return {slope, std::sqrt(sw / det)};
}

}  // namespace detail

// Measures |E g(x_K) - E g(X_{K eta})| across the stepsize grid, with
// K = floor(T/eta), and fits the log-log slope by weighted least squares
// over the grid points whose confidence interval excludes zero. Both sides
// share the objective and client specs from the base config; the SDE side
// integrates with dt = eta/50 so the integrator bias stays well below the
// model error being measured.
inline WeakOrderReport weak_order(const RunConfig& base, Algorithm alg,
                                  SdeFamily family, SdeAlgorithm sde_alg,
                                  const std::vector<double>& eta_grid, double T,
                                  TestFunction g, long samples,
                                  unsigned threads = 0) {
  if (threads == 0) threads = default_threads();
  WeakOrderReport report;
  report.test_function = g;
  rng::Stream init(base.seed, 0, 0, rng::Purpose::kInit);
  const Vec x0 = base.x0 ? *base.x0 : base.objective.initial_point(init);
  // The weak-approximation notion is stated for a constant stepsize; the
  // grid varies eta itself, so any configured schedule is overridden here.
  RunConfig discrete_base = base;
  discrete_base.scheduler = SchedulerSpec::constant();

  for (double eta : eta_grid) {
    const long k_steps = static_cast<long>(T / eta + 1e-9);
    const double t_end = static_cast<double>(k_steps) * eta;
    const double dt = eta / 50.0;
    const SdeModel model(family, sde_alg, base.objective, base.clients, eta);

    std::vector<double> discrete(samples), continuous(samples);
    parallel_for(samples, threads, [&](long m) {
      RunConfig cfg = discrete_base;
      cfg.eta = eta;
      cfg.run_id = static_cast<std::uint64_t>(m);
      Vec x = x0;
      sdelab::detail::RoundWorkspace ws;
      for (long k = 0; k < k_steps; ++k) {
        sdelab::detail::aggregate_round(cfg.objective.gradient(x), cfg, alg, k,
                                        ws);
        x -= ws.lr_eff * ws.direction;
      }
      discrete[m] = eval_test_function(g, cfg.objective, x);

      rng::Stream s(base.seed, static_cast<std::uint64_t>(m), 1,
                    rng::Purpose::kDiffusion);
      const Vec xc = integrate_state(model, x0, discrete_base.scheduler, dt,
                                     t_end, s);
      continuous[m] = eval_test_function(g, model.objective(), xc);
    });

    const auto d = detail::mean_var(discrete);
    const auto c = detail::mean_var(continuous);
    WeakOrderPoint p;
    p.eta = eta;
    p.error = std::abs(d.mean - c.mean);
    p.ci = 1.96 * std::sqrt(d.var / samples + c.var / samples);
    p.usable = p.error > p.ci && p.error > 0.0;
    report.points.push_back(p);
  }

  std::vector<double> lx, ly, lw;
  for (const auto& p : report.points) {
    if (!p.usable) continue;
    lx.push_back(std::log(p.eta));
    ly.push_back(std::log(p.error));
    // Delta method: se of log(error) from the 95% half-width of error.
    const double se_log = p.ci / 1.96 / p.error;
    lw.push_back(1.0 / (se_log * se_log));
  }
  if (lx.size() >= 2) {
    const auto [slope, se] = detail::wls_slope(lx, ly, lw);
    report.slope = slope;
    report.slope_stderr = se;
    report.conclusive = true;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Stability scanning
// ---------------------------------------------------------------------------

enum class StabilityStatus { kConverged, kDiverged };

struct StabilityCell {
  double eta = 0.0;
  double x0 = 0.0;
  StabilityStatus status = StabilityStatus::kConverged;
};

// Classifies each (eta, x0) cell by running the discrete loop to the step
// budget under the divergence detector.
inline std::vector<StabilityCell> stability_scan(
    const RunConfig& base, Algorithm alg, const std::vector<double>& eta_grid,
    const std::vector<double>& x0_grid, unsigned threads = 0) {
  if (threads == 0) threads = default_threads();
  const long total =
      static_cast<long>(eta_grid.size() * x0_grid.size());
  std::vector<StabilityCell> cells(total);
  parallel_for(total, threads, [&](long idx) {
    const double eta = eta_grid[idx / x0_grid.size()];
    const double x0 = x0_grid[idx % x0_grid.size()];
    RunConfig cfg = base;
    cfg.eta = eta;
    cfg.x0 = Vec::Constant(cfg.objective.dimension(), x0);
    const auto rec = run(cfg, alg);
    cells[idx] = {eta, x0,
                  rec.diverged() ? StabilityStatus::kDiverged
                                 : StabilityStatus::kConverged};
  });
  return cells;
}

// ---------------------------------------------------------------------------
// Stepsize constraints and convergence-bound right sides
// ---------------------------------------------------------------------------

// The nine bound evaluators. "Classic" bounds come from the plain first-order
// models, "corrected" from the curvature-corrected ones; the affine variants
// carry (sigma0, sigma1) client moments, the bounded ones a single sigma^2.
// The alt sign variant is the differently normalized form of the corrected
// sign bound; both are kept verbatim and reported side by side.
enum class BoundId {
  kDsgdClassic,
  kDsgdCorrected,
  kDcsgdClassicBounded,
  kDcsgdCorrectedBounded,
  kDcsgdClassicAffine,
  kDcsgdCorrectedAffine,
  kDsignClassic,
  kDsignCorrected,
  kDsignCorrectedAlt,
};

inline const char* bound_name(BoundId id) {
  switch (id) {
    case BoundId::kDsgdClassic: return "dsgd-classic";
    case BoundId::kDsgdCorrected: return "dsgd-corrected";
    case BoundId::kDcsgdClassicBounded: return "dcsgd-classic";
    case BoundId::kDcsgdCorrectedBounded: return "dcsgd-corrected";
    case BoundId::kDcsgdClassicAffine: return "dcsgd-classic-affine";
    case BoundId::kDcsgdCorrectedAffine: return "dcsgd-corrected-affine";
    case BoundId::kDsignClassic: return "dsign-classic";
    case BoundId::kDsignCorrected: return "dsign-corrected";
    case BoundId::kDsignCorrectedAlt: return "dsign-corrected-alt";
  }
  return "?";
}

struct ProblemConstants {
  double eps = 0.5;            // descent slack, in (0,1)
  double l0 = 1.0;
  double l1 = 0.0;
  int clients = 1;
  int dim = 1;
  double sigma0sq_bar = 0.0;   // affine-variance client averages
  double sigma1sq_bar = 0.0;
  double sigma0sq_omega_bar = 0.0;
  double sigma1sq_omega_bar = 0.0;
  double omega_bar = 0.0;
  double sigmasq_bar = 0.0;    // bounded-variance client averages
  double sigmasq_omega_bar = 0.0;
  double sigma_h = 1.0;        // harmonic mean of sign-noise scales
  double nu = 1.0;             // tail index for the sign bounds
  double eta = 0.1;            // base stepsize entering several right sides
  double s0 = 1.0;             // f(x0) - f(x*)
};

// Largest admissible eta*eta_t for the given bound; g is the gradient-norm
// proxy standing in for E|grad f(X_t)|.
inline double constraint_value(BoundId id, const ProblemConstants& c,
                               double g) {
  const double n = static_cast<double>(c.clients);
  const double d = static_cast<double>(c.dim);
  const auto reject = [](const char* which) -> double {
    throw std::domain_error(std::string("constraint_value: ") + which +
                            " imposes no stepsize restriction here "
                            "(denominator vanishes)");
  };
  switch (id) {
    case BoundId::kDsgdClassic: {
      const double den = d * (c.sigma1sq_bar * c.l0 + c.sigma0sq_bar * c.l1 +
                              c.l1 * c.sigma1sq_bar * g);
      return den <= 0.0 ? reject("dsgd-classic") : 2.0 * n * c.eps / den;
    }
    case BoundId::kDsgdCorrected: {
      const double den =
          c.l0 + c.l1 * g +
          d / n * (c.sigma1sq_bar * c.l0 + c.sigma0sq_bar * c.l1 +
                   c.l1 * c.sigma1sq_bar * g);
      return den <= 0.0 ? reject("dsgd-corrected") : 2.0 * c.eps / den;
    }
    case BoundId::kDcsgdClassicBounded: {
      const double den = c.omega_bar * c.l0 +
                         d * (c.sigmasq_bar + c.sigmasq_omega_bar) * c.l1 +
                         c.omega_bar * c.l1 * g;
      return den <= 0.0 ? reject("dcsgd-classic") : 2.0 * n * c.eps / den;
    }
    case BoundId::kDcsgdCorrectedBounded: {
      const double den = c.l0 + c.l1 * g +
                         (c.omega_bar * c.l0 +
                          d * (c.sigmasq_bar + c.sigmasq_omega_bar) * c.l1 +
                          c.omega_bar * c.l1 * g) /
                             n;
      return den <= 0.0 ? reject("dcsgd-corrected") : 2.0 * c.eps / den;
    }
    case BoundId::kDcsgdClassicAffine: {
      const double distortion =
          c.omega_bar + d * (c.sigma1sq_omega_bar + c.sigma1sq_bar);
      const double den =
          (c.l0 + c.l1 * g) * distortion / n +
          c.l1 * d * (c.sigma0sq_bar + c.sigma0sq_omega_bar) / n;
      return den <= 0.0 ? reject("dcsgd-classic-affine") : 2.0 * c.eps / den;
    }
    case BoundId::kDcsgdCorrectedAffine: {
      const double distortion =
          c.omega_bar + d * (c.sigma1sq_omega_bar + c.sigma1sq_bar);
      const double den =
          (c.l0 + c.l1 * g) * (1.0 + distortion / n) +
          c.l1 * d * (c.sigma0sq_bar + c.sigma0sq_omega_bar) / n;
      return den <= 0.0 ? reject("dcsgd-corrected-affine") : 2.0 * c.eps / den;
    }
    case BoundId::kDsignClassic: {
      const double den = c.sigma_h * d * c.l1;
      const double ell = xi_constants(c.nu).ell;
      return den <= 0.0 ? reject("dsign-classic") : 2.0 * n * ell / den;
    }
    case BoundId::kDsignCorrected: {
      const auto xc = xi_constants(c.nu);
      const double k = c.l1 * d * c.sigma_h / (2.0 * n) +
                       std::sqrt(d) * (c.l0 + c.l1) * xc.m;
      return k <= 0.0 ? reject("dsign-corrected") : xc.ell / k;
    }
    case BoundId::kDsignCorrectedAlt: {
      const auto xc = xi_constants(c.nu);
      const double k = c.l1 / (2.0 * n) +
                       (c.l0 + c.l1) * xc.m / (c.sigma_h * std::sqrt(d));
      const double den = k * c.sigma_h * d;
      return den <= 0.0 ? reject("dsign-corrected-alt") : xc.ell / den;
    }
  }
  return 0.0;
}

// Right side of the bound on E|grad f(X_that)|^2 at horizon t.
inline double bound_rhs(BoundId id, const ProblemConstants& c,
                        const SchedulerSpec& sched, double t) {
  const double n = static_cast<double>(c.clients);
  const double d = static_cast<double>(c.dim);
  const double p1 = phi(sched, 1, t);
  const double p2 = phi(sched, 2, t);
  const double slack = 1.0 - c.eps;
  switch (id) {
    case BoundId::kDsgdClassic:
      return (c.s0 + p2 * c.eta * d * (c.l0 + c.l1) *
                         (c.sigma0sq_bar + c.sigma1sq_bar) / (2.0 * n)) /
             (p1 * slack);
    case BoundId::kDsgdCorrected:
      return (c.s0 +
              c.eta * p2 * (c.l0 + c.l1) * d * c.sigma0sq_bar / (2.0 * n)) /
             (p1 * slack);
    case BoundId::kDcsgdClassicBounded:
    case BoundId::kDcsgdCorrectedBounded:
      return (c.s0 + p2 * c.eta * (c.l0 + c.l1) * d *
                         (c.sigmasq_bar + c.sigmasq_omega_bar) / (2.0 * n)) /
             (p1 * slack);
    case BoundId::kDcsgdClassicAffine: {
      const double num =
          c.l0 * (c.omega_bar + d * (c.sigma1sq_omega_bar + c.sigma1sq_bar)) +
          c.l1 * d * (c.sigma0sq_bar + c.sigma0sq_omega_bar);
      return c.s0 / (slack * p1) + p2 * num / (2.0 * n * slack * p1);
    }
    case BoundId::kDcsgdCorrectedAffine:
      return (c.s0 + p2 * c.eta * (c.l0 + c.l1) * d *
                         (c.sigma0sq_bar + c.sigma0sq_omega_bar) / (2.0 * n)) /
             (slack * p1);
    case BoundId::kDsignClassic: {
      const double ell = xi_constants(c.nu).ell;
      const double den = p1 * ell / c.sigma_h - p2 * c.eta * d * c.l1 / (2.0 * n);
      if (den <= 0.0)
        throw std::domain_error("bound_rhs: dsign-classic denominator <= 0");
      return (c.s0 + c.eta * (c.l0 + c.l1) * d * p2 / (2.0 * n)) / den;
    }
    case BoundId::kDsignCorrected: {
      const auto xc = xi_constants(c.nu);
      const double k = c.l1 * d * c.sigma_h / (2.0 * n) +
                       std::sqrt(d) * (c.l0 + c.l1) * xc.m;
      const double den = p1 * xc.ell - p2 * c.eta * k;
      if (den <= 0.0)
        throw std::domain_error("bound_rhs: dsign-corrected denominator <= 0");
      return c.sigma_h / den *
             (c.s0 + p2 * c.eta * (c.l0 + c.l1) *
                         (d / (2.0 * n) + xc.m * std::sqrt(d) / c.sigma_h));
    }
    case BoundId::kDsignCorrectedAlt: {
      const auto xc = xi_constants(c.nu);
      const double k = c.l1 / (2.0 * n) +
                       (c.l0 + c.l1) * xc.m / (c.sigma_h * std::sqrt(d));
      const double den = p1 * xc.ell / c.sigma_h - p2 * k;
      if (den <= 0.0)
        throw std::domain_error("bound_rhs: dsign-corrected-alt denominator <= 0");
      return (c.s0 + p2 * c.eta * (c.l0 + c.l1) * d *
                         (1.0 / (2.0 * n) + xc.m / (c.sigma_h * std::sqrt(d)))) /
             den;
    }
  }
  return 0.0;
}

// Random-time weighting prescribed by each bound.
inline RandomTimeWeights bound_time_weights(BoundId id,
                                            const ProblemConstants& c) {
  const double n = static_cast<double>(c.clients);
  const double d = static_cast<double>(c.dim);
  switch (id) {
    case BoundId::kDsignClassic: {
      const auto xc = xi_constants(c.nu);
      return RandomTimeWeights::corrected(c.eta, d * c.l1 / (2.0 * n),
                                          xc.ell / c.sigma_h);
    }
    case BoundId::kDsignCorrected: {
      const auto xc = xi_constants(c.nu);
      const double k = c.l1 * d * c.sigma_h / (2.0 * n) +
                       std::sqrt(d) * (c.l0 + c.l1) * xc.m;
      return RandomTimeWeights::corrected(c.eta, k, xc.ell);
    }
    case BoundId::kDsignCorrectedAlt: {
      const auto xc = xi_constants(c.nu);
      const double k = c.l1 / (2.0 * n) +
                       (c.l0 + c.l1) * xc.m / (c.sigma_h * std::sqrt(d));
      return RandomTimeWeights::corrected(1.0, k, xc.ell / c.sigma_h);
    }
    default:
      return RandomTimeWeights::eta_weighted();
  }
}

struct BoundCurvePoint {
  double t = 0.0;
  double rhs = 0.0;
  double empirical = 0.0;  // Monte Carlo E|grad f(X_that)|^2
  double ci = 0.0;         // standard error of the estimate
  bool satisfied = false;  // empirical + 2*ci <= rhs
};

struct BoundReport {
  BoundId id = BoundId::kDsgdCorrected;
  double constraint = 0.0;  // max admissible eta*eta_t
  std::vector<BoundCurvePoint> points;
  bool satisfied = false;
};

// Evaluates the bound right side on the time grid and pairs it with the
// Monte Carlo estimate of E|grad f(X_that)|^2 from SDE trajectories, with
// the random evaluation time drawn per trajectory.
inline BoundReport bound_curve(BoundId id, const ProblemConstants& c,
                               const SdeModel& model, const Vec& x0,
                               const SchedulerSpec& sched,
                               const std::vector<double>& t_grid, long samples,
                               std::uint64_t seed, double g_proxy,
                               unsigned threads = 0) {
  if (threads == 0) threads = default_threads();
  BoundReport report;
  report.id = id;
  report.constraint = constraint_value(id, c, g_proxy);
  for (double t : t_grid) {
    // Schedulers here are nonincreasing, so the constraint holds on all of
    // [0,t] iff it holds at 0.
    if (c.eta * eta_at(sched, 0.0) >= report.constraint)
      throw std::domain_error(
          "bound_curve: stepsize violates the bound's constraint");
    const auto weights = bound_time_weights(id, c);
    std::vector<double> vals(samples);
    parallel_for(samples, threads, [&](long m) {
      rng::Stream time_stream(seed, static_cast<std::uint64_t>(m), 0,
                              rng::Purpose::kTime);
      const double that = sample_random_time(sched, t, weights, time_stream);
      rng::Stream path(seed, static_cast<std::uint64_t>(m), 0,
                       rng::Purpose::kDiffusion);
      const double dt = model.eta() / 50.0;
      const Vec x = integrate_state(model, x0, sched, dt, that, path);
      vals[m] = model.objective().gradient(x).squaredNorm();
    });
    const auto mv = detail::mean_var(vals);
    BoundCurvePoint p;
    p.t = t;
    p.rhs = bound_rhs(id, c, sched, t);
    p.empirical = mv.mean;
    p.ci = std::sqrt(mv.var / samples);
    p.satisfied = p.empirical + 2.0 * p.ci <= p.rhs;
    report.points.push_back(p);
  }
  report.satisfied = true;
  for (const auto& p : report.points) report.satisfied &= p.satisfied;
  return report;
}

}  // namespace sdelab

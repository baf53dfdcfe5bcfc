#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sdelab/rng.hpp"

namespace sdelab {

// Constants entering the normalized-stepsize denominator: smoothness,
// client-averaged noise moments, compression rate, client count, dimension.
struct NormalizationParams {
  enum class Form { kFull, kSimple };

  double eps = 0.5;  // in (0,1)
  double l0 = 1.0;
  double l1 = 1.0;
  double omega_bar = 0.0;
  double sigma0sq_bar = 0.0;
  double sigma1sq_bar = 0.0;
  double sigma0sq_omega_bar = 0.0;
  double sigma1sq_omega_bar = 0.0;
  int clients = 1;
  int dim = 1;
  Form form = Form::kFull;
};

struct SchedulerSpec {
  enum class Kind { kConstant, kPowerLaw, kInverseSqrtStep, kAdaptiveNormalized };

  Kind kind = Kind::kConstant;
  double a = 0.5;  // power-law exponent, in (0,1]
  NormalizationParams norm;

  static SchedulerSpec constant() { return SchedulerSpec{}; }

  static SchedulerSpec power_law(double a) {
    if (a <= 0.0 || a > 1.0)
      throw std::invalid_argument("power_law: need a in (0,1]");
    SchedulerSpec s;
    s.kind = Kind::kPowerLaw;
    s.a = a;
    return s;
  }

  static SchedulerSpec inverse_sqrt_step() {
    SchedulerSpec s;
    s.kind = Kind::kInverseSqrtStep;
    return s;
  }

  static SchedulerSpec adaptive_normalized(NormalizationParams p) {
    SchedulerSpec s;
    s.kind = Kind::kAdaptiveNormalized;
    s.norm = p;
    return s;
  }

  bool is_adaptive() const { return kind == Kind::kAdaptiveNormalized; }
};

// Scheduler value eta_t at continuous time t (discrete callers pass t = k).
inline double eta_at(const SchedulerSpec& s, double t) {
  switch (s.kind) {
    case SchedulerSpec::Kind::kConstant:
      return 1.0;
    case SchedulerSpec::Kind::kPowerLaw:
      return std::pow(1.0 + t, -s.a);
    case SchedulerSpec::Kind::kInverseSqrtStep:
      return 1.0 / std::sqrt(t + 1.0);
    case SchedulerSpec::Kind::kAdaptiveNormalized:
      throw std::logic_error(
          "eta_at: adaptive scheduler depends on the gradient-norm estimate");
  }
  return 1.0;
}

// phi_i(t) = int_0^t eta_s^i ds; closed form where available, otherwise
// adaptive quadrature with absolute tolerance 1e-9.
inline double phi(const SchedulerSpec& s, int i, double t) {
  if (i != 1 && i != 2) throw std::invalid_argument("phi: i must be 1 or 2");
  if (t < 0.0) throw std::invalid_argument("phi: t must be >= 0");
  const double a = s.kind == SchedulerSpec::Kind::kInverseSqrtStep ? 0.5 : s.a;
  switch (s.kind) {
    case SchedulerSpec::Kind::kConstant:
      return t;
    case SchedulerSpec::Kind::kPowerLaw:
    case SchedulerSpec::Kind::kInverseSqrtStep: {
      const double ia = static_cast<double>(i) * a;
      if (std::abs(ia - 1.0) < 1e-12) return std::log1p(t);
      return (std::pow(1.0 + t, 1.0 - ia) - 1.0) / (1.0 - ia);
    }
    case SchedulerSpec::Kind::kAdaptiveNormalized:
      throw std::logic_error("phi: undefined for the adaptive scheduler");
  }
  return t;
}

// Quadrature fallback, used to cross-check the closed forms.
inline double phi_quadrature(const SchedulerSpec& s, int i, double t) {
  const auto f = [&](double u) {
    const double e = eta_at(s, u);
    return i == 1 ? e : e * e;
  };
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, 0.0, t, 12, 1e-9);
}

// Largest admissible eta*eta_t given the gradient-norm estimate g_hat:
//   2 eps / [ (L0 + L1 g)(1 + (w + d(s1w + s1))/N) + L1 d (s0 + s0w)/N ]
// with the client-averaged noise/compression moments. The simple form is the
// eta0/(1+g) fallback.
inline double normalized_lr(double eta0, double g_hat,
                            const NormalizationParams& p) {
  if (g_hat < 0.0) throw std::invalid_argument("normalized_lr: g_hat < 0");
  if (p.form == NormalizationParams::Form::kSimple)
    return eta0 / (1.0 + g_hat);
  const double n = static_cast<double>(p.clients);
  const double d = static_cast<double>(p.dim);
  const double distortion =
      (p.omega_bar + d * (p.sigma1sq_omega_bar + p.sigma1sq_bar)) / n;
  const double denom = (p.l0 + p.l1 * g_hat) * (1.0 + distortion) +
                       p.l1 * d * (p.sigma0sq_bar + p.sigma0sq_omega_bar) / n;
  if (denom <= 0.0)
    throw std::invalid_argument(
        "normalized_lr: degenerate configuration, denominator is zero");
  return 2.0 * p.eps / denom;
}

// Weighting for the random evaluation time.
struct RandomTimeWeights {
  enum class Kind {
    kEtaWeighted,           // density proportional to eta_s
    kCorrectedEtaWeighted,  // density proportional to eta_s*ell - eta_s^2*eta*K
  };

  Kind kind = Kind::kEtaWeighted;
  double eta = 0.0;
  double big_k = 0.0;
  double ell = 1.0;

  static RandomTimeWeights eta_weighted() { return RandomTimeWeights{}; }

  static RandomTimeWeights corrected(double eta, double big_k, double ell) {
    RandomTimeWeights w;
    w.kind = Kind::kCorrectedEtaWeighted;
    w.eta = eta;
    w.big_k = big_k;
    w.ell = ell;
    return w;
  }
};

// Draws from the stated density on [0, t] by inverse CDF on a uniform grid
// with linear interpolation.
inline double sample_random_time(const SchedulerSpec& s, double t,
                                 const RandomTimeWeights& w, rng::Stream& rng,
                                 int grid_points = 10000) {
  if (t <= 0.0) throw std::invalid_argument("sample_random_time: t must be > 0");
  const double dt = t / (grid_points - 1);
  std::vector<double> density(grid_points), cdf(grid_points);
  for (int k = 0; k < grid_points; ++k) {
    const double u = k * dt;
    const double e = eta_at(s, u);
    double val = e;
    if (w.kind == RandomTimeWeights::Kind::kCorrectedEtaWeighted)
      val = e * w.ell - e * e * w.eta * w.big_k;
    if (val <= 0.0)
      throw std::invalid_argument(
          "sample_random_time: density not positive on [0,t]");
    density[k] = val;
  }
  cdf[0] = 0.0;
  for (int k = 1; k < grid_points; ++k)
    cdf[k] = cdf[k - 1] + 0.5 * (density[k - 1] + density[k]) * dt;
  const double total = cdf.back();
  const double u = rng.uniform01() * total;
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.begin()) return 0.0;
  const auto hi = static_cast<std::size_t>(it - cdf.begin());
  const double frac = (u - cdf[hi - 1]) / (cdf[hi] - cdf[hi - 1]);
  return (static_cast<double>(hi - 1) + frac) * dt;
}

}  // namespace sdelab

#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sdelab/compressors.hpp"
#include "sdelab/noise.hpp"
#include "sdelab/objectives.hpp"
#include "sdelab/optimizers.hpp"
#include "sdelab/rng.hpp"
#include "sdelab/schedulers.hpp"

namespace sdelab {

// Xi_nu(x) = F_nu(x) - 1/2 with F_nu the Student-t(nu) CDF. Odd, monotone,
// bounded by 1/2 in absolute value; drives the sign-update drift.
class XiFunction {
 public:
  explicit XiFunction(double nu) : nu_(nu), cauchy_(nu == 1.0) {
    if (nu <= 0.0) throw std::invalid_argument("XiFunction: nu must be > 0");
  }

  double nu() const { return nu_; }

  double operator()(double x) const {
    if (cauchy_) return std::atan(x) / std::numbers::pi;
    return boost::math::cdf(boost::math::students_t_distribution<double>(nu_),
                            x) -
           0.5;
  }

  // Xi'(x) is the Student-t density.
  double deriv(double x) const {
    if (cauchy_) return 1.0 / (std::numbers::pi * (1.0 + x * x));
    return boost::math::pdf(boost::math::students_t_distribution<double>(nu_),
                            x);
  }

 private:
  double nu_;
  bool cauchy_;
};

inline double xi(double nu, double x) { return XiFunction(nu)(x); }

struct XiConstants {
  double ell;  // 2 * Xi'(0)
  double m;    // sup Xi' = Xi'(0), the density mode
};

// The density of a symmetric Student-t peaks at 0, so M_nu = Xi'(0) and
// ell_nu = 2 M_nu, with Xi'(0) = Gamma((nu+1)/2) / (sqrt(pi nu) Gamma(nu/2)).
inline XiConstants xi_constants(double nu) {
  if (nu <= 0.0) throw std::invalid_argument("xi_constants: nu must be > 0");
  const double log_m = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                       0.5 * std::log(std::numbers::pi * nu);
  const double m = std::exp(log_m);
  return {2.0 * m, m};
}

enum class SdeFamily { kClassicFirst, kClassicSecond, kCorrectedFirst };
enum class SdeAlgorithm { kSgd, kDcsgd, kDsignsgd };

// Continuous-time surrogate with drift and diagonal diffusion factor. The
// diffusion entries are per-coordinate standard deviations and already carry
// the sqrt(eta/N) premultiplier.
class SdeModel {
 public:
  SdeModel(SdeFamily family, SdeAlgorithm alg, Objective objective,
           std::vector<ClientSpec> clients, double eta)
      : family_(family),
        alg_(alg),
        objective_(std::move(objective)),
        clients_(std::move(clients)),
        eta_(eta) {
    if (clients_.empty())
      throw std::invalid_argument("SdeModel: at least one client required");
    if (eta_ <= 0.0) throw std::invalid_argument("SdeModel: eta must be > 0");
    const int d = objective_.dimension();
    for (const auto& c : clients_) {
      switch (alg_) {
        case SdeAlgorithm::kSgd:
          if (c.compressor.kind != CompressorSpec::Kind::kIdentity)
            throw std::invalid_argument("SdeModel: SGD model takes no compressor");
          [[fallthrough]];
        case SdeAlgorithm::kDcsgd:
          if (c.noise.kind == NoiseSpec::Kind::kStudentT)
            throw std::invalid_argument(
                "SdeModel: Student-t noise has no second moment; use the "
                "sign model");
          if (c.compressor.kind == CompressorSpec::Kind::kSign)
            throw std::invalid_argument(
                "SdeModel: sign map is not an unbiased compressor");
          break;
        case SdeAlgorithm::kDsignsgd:
          if (family_ == SdeFamily::kClassicSecond)
            throw std::invalid_argument(
                "SdeModel: no second-order model for the sign update");
          if (c.noise.kind != NoiseSpec::Kind::kStudentT)
            throw std::invalid_argument(
                "SdeModel: sign model requires Student-t noise");
          if (c.noise.scale.size() != d)
            throw std::invalid_argument("SdeModel: noise scale dimension mismatch");
          xis_.emplace_back(c.noise.nu);
          break;
      }
    }
  }

  SdeFamily family() const { return family_; }
  SdeAlgorithm algorithm() const { return alg_; }
  const Objective& objective() const { return objective_; }
  double eta() const { return eta_; }
  int clients() const { return static_cast<int>(clients_.size()); }
  int dimension() const { return objective_.dimension(); }

  void drift(const Vec& x, Vec& out) const {
    const Vec g = objective_.gradient(x);
    const double n = static_cast<double>(clients_.size());
    if (alg_ != SdeAlgorithm::kDsignsgd) {
      out = -g;
      if (family_ != SdeFamily::kClassicFirst) {
        const double curv = family_ == SdeFamily::kCorrectedFirst ? 0.5 : -0.5;
        out += (curv * eta_) * objective_.hessian_vec(x, g);
      }
      return;
    }

    out.setZero(x.size());
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      const Vec& scale = clients_[i].noise.scale;
      const Vec w = g.cwiseQuotient(scale);
      for (Eigen::Index j = 0; j < x.size(); ++j) out(j) -= 2.0 * xis_[i](w(j));
    }
    out /= n;
    if (family_ == SdeFamily::kCorrectedFirst) {
      for (std::size_t i = 0; i < clients_.size(); ++i) {
        const Vec& scale = clients_[i].noise.scale;
        const Vec w = g.cwiseQuotient(scale);
        Vec u(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j)
          u(j) = xis_[i].deriv(w(j)) * xis_[i](w(j));
        out += (eta_ / n) * objective_.hessian_vec(x, u).cwiseQuotient(scale);
      }
    }
  }

  void diffusion_diag(const Vec& x, Vec& out) const {
    const Vec g = objective_.gradient(x);
    const double n = static_cast<double>(clients_.size());
    out.setZero(x.size());
    if (alg_ != SdeAlgorithm::kDsignsgd) {
      const double gsq = g.squaredNorm();
      for (const auto& c : clients_) {
        const double var = c.noise.kind == NoiseSpec::Kind::kGaussianAffine
                               ? c.noise.sigma0 * c.noise.sigma0 +
                                     c.noise.sigma1 * c.noise.sigma1 * gsq
                               : 0.0;
        const double omega = c.compressor.kind == CompressorSpec::Kind::kIdentity
                                 ? 0.0
                                 : omega_of(c.compressor);
        // E[Phi_j^2] = omega * E[(noisy gradient)_j^2] for random masks.
        out.array() += omega * (g.array().square() + var) + var;
      }
      out = (out * eta_ / (n * n)).cwiseSqrt();
      return;
    }

    for (std::size_t i = 0; i < clients_.size(); ++i) {
      const Vec& scale = clients_[i].noise.scale;
      const Vec w = g.cwiseQuotient(scale);
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double v = xis_[i](w(j));
        out(j) += v * v;
      }
    }
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      double v = 1.0 - 4.0 * out(j) / n;
      if (v < -1e-12)
        throw std::logic_error("SdeModel: sign diffusion went negative");
      out(j) = std::sqrt(eta_ / n * std::max(v, 0.0));
    }
  }

  Vec drift(const Vec& x) const {
    Vec out;
    drift(x, out);
    return out;
  }

  Vec diffusion_diag(const Vec& x) const {
    Vec out;
    diffusion_diag(x, out);
    return out;
  }

 private:
  SdeFamily family_;
  SdeAlgorithm alg_;
  Objective objective_;
  std::vector<ClientSpec> clients_;
  double eta_;
  std::vector<XiFunction> xis_;  // one per client, sign model only
};

inline SdeModel build_sde(SdeFamily family, SdeAlgorithm alg,
                          Objective objective, std::vector<ClientSpec> clients,
                          double eta) {
  return SdeModel(family, alg, std::move(objective), std::move(clients), eta);
}

// Euler-Maruyama step rule shared by the recording and lean integrators:
//   X <- X + eta_t * drift(X) dt + eta_t * diffusion(X) .* xi * sqrt(dt).
namespace detail {

struct EmWorkspace {
  Vec drift, diff, x;
};

inline void em_step(const SdeModel& model, const SchedulerSpec& sched,
                    double t, double dt, rng::Stream& s, EmWorkspace& w) {
  const double eta_t = eta_at(sched, t);
  model.drift(w.x, w.drift);
  model.diffusion_diag(w.x, w.diff);
  const double sqdt = std::sqrt(dt);
  for (Eigen::Index j = 0; j < w.x.size(); ++j)
    w.x(j) += eta_t * (w.drift(j) * dt + w.diff(j) * s.normal() * sqdt);
}

}  // namespace detail

// Integrates one trajectory and returns the state at time T, consuming draws
// from the given stream (one sub-step per counter step). A trailing partial
// step covers T not divisible by dt.
inline Vec integrate_state(const SdeModel& model, const Vec& x0,
                           const SchedulerSpec& sched, double dt, double t_end,
                           rng::Stream& s) {
  detail::EmWorkspace w;
  w.x = x0;
  const long full = static_cast<long>(t_end / dt + 1e-9);
  for (long k = 0; k < full; ++k) {
    s.set_step(static_cast<std::uint64_t>(k));
    detail::em_step(model, sched, k * dt, dt, s, w);
  }
  const double rem = t_end - full * dt;
  if (rem > 1e-12) {
    s.set_step(static_cast<std::uint64_t>(full));
    detail::em_step(model, sched, full * dt, rem, s, w);
  }
  return w.x;
}

// Recording integrator on the shared trajectory schema; step indices count
// integrator steps and time is continuous.
inline TrajectoryRecord integrate(const SdeModel& model, const Vec& x0,
                                  const SchedulerSpec& sched, double dt,
                                  double t_end, std::uint64_t seed,
                                  std::uint64_t run_id = 0,
                                  double divergence_threshold = 1e12,
                                  long record_stride = 1) {
  if (dt <= 0.0 || t_end <= 0.0)
    throw std::invalid_argument("integrate: dt and T must be > 0");
  TrajectoryRecord rec;
  detail::EmWorkspace w;
  w.x = x0;
  rng::Stream s(seed, run_id, 0, rng::Purpose::kDiffusion);
  const long steps = static_cast<long>(std::llround(t_end / dt));
  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    if (k % record_stride == 0) {
      const Vec g = model.objective().gradient(w.x);
      rec.points.push_back({k, t, model.objective().loss(w.x), g.squaredNorm(),
                            model.eta() * eta_at(sched, t), g.norm()});
    }
    s.set_step(static_cast<std::uint64_t>(k));
    detail::em_step(model, sched, t, dt, s, w);
    const double loss = model.objective().loss(w.x);
    if (!std::isfinite(loss) || loss > divergence_threshold ||
        !w.x.allFinite() || w.x.norm() > divergence_threshold) {
      rec.status = TrajectoryRecord::Status::kDiverged;
      rec.diverged_step = k + 1;
      rec.final_x = w.x;
      return rec;
    }
  }
  const Vec g = model.objective().gradient(w.x);
  rec.points.push_back({steps, steps * dt, model.objective().loss(w.x),
                        g.squaredNorm(), 0.0, g.norm()});
  rec.final_x = w.x;
  return rec;
}

}  // namespace sdelab

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>

#include "sdelab/objectives.hpp"
#include "sdelab/rng.hpp"

namespace sdelab {

// Per-client gradient-noise law Z_i(x), added to the exact gradient.
struct NoiseSpec {
  enum class Kind { kNone, kGaussianAffine, kStudentT };

  Kind kind = Kind::kNone;
  double sigma0 = 0.0;  // bounded-variance part
  double sigma1 = 0.0;  // affine part, per-coordinate variance sigma1^2 |g|^2
  double nu = 0.0;      // Student-t degrees of freedom
  Vec scale;            // per-coordinate Student-t scales (diagonal sqrt(Sigma))

  static NoiseSpec none() { return NoiseSpec{}; }

  static NoiseSpec gaussian_affine(double sigma0, double sigma1) {
    if (sigma0 < 0.0 || sigma1 < 0.0)
      throw std::invalid_argument("gaussian_affine: sigmas must be >= 0");
    NoiseSpec n;
    n.kind = Kind::kGaussianAffine;
    n.sigma0 = sigma0;
    n.sigma1 = sigma1;
    return n;
  }

  static NoiseSpec student_t(double nu, Vec scale) {
    if (nu <= 0.0) throw std::invalid_argument("student_t: nu must be > 0");
    if ((scale.array() <= 0.0).any())
      throw std::invalid_argument("student_t: scales must be > 0");
    NoiseSpec n;
    n.kind = Kind::kStudentT;
    n.nu = nu;
    n.scale = std::move(scale);
    return n;
  }

  static NoiseSpec student_t_iso(double nu, double scale, int dim) {
    return student_t(nu, Vec::Constant(dim, scale));
  }

  // Largest coordinate of the scale vector (sigma_max for this client).
  double sigma_max() const {
    if (kind != Kind::kStudentT)
      throw std::logic_error("sigma_max: only defined for Student-t noise");
    return scale.maxCoeff();
  }
};

// One draw of Z_i at gradient g, written into `out`. Gaussian-affine noise is
// diagonal with per-coordinate variance sigma0^2 + sigma1^2 |g|^2; Student-t
// noise is scale_j * t_nu per coordinate via the normal / sqrt(chi2/nu) ratio.
inline void sample_noise_into(const NoiseSpec& spec, const Vec& g,
                              rng::Stream& s, Vec& out) {
  const Eigen::Index d = g.size();
  out.resize(d);
  switch (spec.kind) {
    case NoiseSpec::Kind::kNone:
      out.setZero();
      return;
    case NoiseSpec::Kind::kGaussianAffine: {
      const double sd = std::sqrt(spec.sigma0 * spec.sigma0 +
                                  spec.sigma1 * spec.sigma1 * g.squaredNorm());
      for (Eigen::Index j = 0; j < d; ++j) out(j) = sd * s.normal();
      return;
    }
    case NoiseSpec::Kind::kStudentT: {
      if (spec.scale.size() != d)
        throw std::invalid_argument("sample_noise: scale length mismatch");
      for (Eigen::Index j = 0; j < d; ++j)
        out(j) = spec.scale(j) * s.student_t(spec.nu);
      return;
    }
  }
}

inline Vec sample_noise(const NoiseSpec& spec, const Vec& g, rng::Stream& s) {
  Vec out;
  sample_noise_into(spec, g, s, out);
  return out;
}

// Client-averaged (sigma0^2, sigma1^2); only valid for Gaussian/None specs.
inline std::pair<double, double> affine_variance_params(
    std::span<const NoiseSpec> specs) {
  double s0 = 0.0, s1 = 0.0;
  for (const auto& n : specs) {
    if (n.kind == NoiseSpec::Kind::kStudentT)
      throw std::invalid_argument(
          "affine_variance_params: Student-t clients use harmonic_mean_scale");
    s0 += n.sigma0 * n.sigma0;
    s1 += n.sigma1 * n.sigma1;
  }
  const double n = specs.empty() ? 1.0 : static_cast<double>(specs.size());
  return {s0 / n, s1 / n};
}

// Harmonic mean of the clients' sigma_max values: N / sum(1/sigma_max_i).
inline double harmonic_mean_scale(std::span<const NoiseSpec> specs) {
  if (specs.empty())
    throw std::invalid_argument("harmonic_mean_scale: no clients");
  double acc = 0.0;
  for (const auto& n : specs) {
    const double m = n.sigma_max();
    if (m == 0.0) throw std::invalid_argument("harmonic_mean_scale: zero scale");
    acc += 1.0 / m;
  }
  return static_cast<double>(specs.size()) / acc;
}

}  // namespace sdelab

#pragma once

#include <stdexcept>

#include "sdelab/objectives.hpp"
#include "sdelab/rng.hpp"

namespace sdelab {

// Stochastic gradient compressors: identity, unbiased random sparsification
// with rate omega = p/(1-p), and the coordinate-wise sign map.
struct CompressorSpec {
  enum class Kind { kIdentity, kRandomSparsify, kSign };

  Kind kind = Kind::kIdentity;
  double p = 0.0;  // drop probability for random sparsification

  static CompressorSpec identity() { return CompressorSpec{}; }

  static CompressorSpec random_sparsify(double p) {
    if (p < 0.0 || p >= 1.0)
      throw std::invalid_argument("random_sparsify: need 0 <= p < 1");
    CompressorSpec c;
    c.kind = Kind::kRandomSparsify;
    c.p = p;
    return c;
  }

  // Sparsifier whose distortion rate is exactly omega (p = omega/(1+omega)).
  static CompressorSpec with_omega(double omega) {
    if (omega < 0.0) throw std::invalid_argument("with_omega: omega must be >= 0");
    if (omega == 0.0) return identity();
    return random_sparsify(omega / (1.0 + omega));
  }

  static CompressorSpec sign() {
    CompressorSpec c;
    c.kind = Kind::kSign;
    return c;
  }
};

// Compression rate omega; computed, never user-supplied. The sign map is
// biased and has no omega.
inline double omega_of(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorSpec::Kind::kIdentity:
      return 0.0;
    case CompressorSpec::Kind::kRandomSparsify:
      return spec.p / (1.0 - spec.p);
    case CompressorSpec::Kind::kSign:
      throw std::invalid_argument("omega_of: sign compressor has no omega");
  }
  return 0.0;
}

inline double sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Applies the compressor, writing into `out`. Random sparsification zeroes
// each coordinate independently with probability p and rescales survivors by
// 1/(1-p), so E[C(v)] = v and E|C(v)-v|^2 = (p/(1-p)) |v|^2 exactly.
inline void compress_into(const CompressorSpec& spec, const Vec& v,
                          rng::Stream& s, Vec& out) {
  out.resize(v.size());
  switch (spec.kind) {
    case CompressorSpec::Kind::kIdentity:
      out = v;
      return;
    case CompressorSpec::Kind::kRandomSparsify: {
      const double inv_keep = 1.0 / (1.0 - spec.p);
      for (Eigen::Index j = 0; j < v.size(); ++j)
        out(j) = s.uniform01() < spec.p ? 0.0 : v(j) * inv_keep;
      return;
    }
    case CompressorSpec::Kind::kSign:
      for (Eigen::Index j = 0; j < v.size(); ++j) out(j) = sign_of(v(j));
      return;
  }
}

inline Vec compress(const CompressorSpec& spec, const Vec& v, rng::Stream& s) {
  Vec out;
  compress_into(spec, v, s, out);
  return out;
}

}  // namespace sdelab

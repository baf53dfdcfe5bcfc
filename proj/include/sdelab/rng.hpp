#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace sdelab::rng {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// A draw is addressed by (key, counter); there is no hidden state, so
// independent streams are cheap and reproducible across threads.
namespace detail {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace detail

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter philox4x32(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mul_hi_lo(detail::kPhiloxM0, ctr[0], hi0, lo0);
    detail::mul_hi_lo(detail::kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

// Student-t(nu) from its ingredients: a standard normal draw z and a
// chi-square(nu) draw w. Odd in z by construction.
inline double student_t_from(double z, double w, double nu) {
  return z * std::sqrt(nu / w);
}

// splitmix64 finalizer; used to derive stream keys from ids.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t parent, std::uint64_t id) {
  return mix64(parent ^ (0x9E3779B97F4A7C15ull * (id + 1)));
}

// Tags keeping draws for different roles in disjoint streams even when
// (seed, run, client, step) coincide.
enum class Purpose : std::uint64_t {
  kGeneric = 0,
  kNoise = 1,
  kMask = 2,
  kInit = 3,
  kDiffusion = 4,
  kTime = 5,
};

// One logical random stream. The key is derived from
// (master seed, run, client, purpose); the step selects the high half of
// the 128-bit Philox counter, so draws within a step are addressable
// regardless of how many draws other steps consumed.
class Stream {
 public:
  Stream(std::uint64_t master_seed, std::uint64_t run, std::uint64_t client,
         Purpose purpose, std::uint64_t step = 0) {
    std::uint64_t k = derive(master_seed, run);
    k = derive(k, client);
    k = derive(k, static_cast<std::uint64_t>(purpose));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    set_step(step);
  }

  void set_step(std::uint64_t step) {
    step_ = step;
    block_ = 0;
    pos_ = 4;
    has_cached_normal_ = false;
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1].
  double uniform_pos() { return 1.0 - uniform01(); }

  // Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (has_cached_normal_) {
      has_cached_normal_ = false;
      return cached_normal_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
  }

  // Gamma(shape a, scale 1), Marsaglia-Tsang squeeze method.
  double gamma(double a) {
    if (a < 1.0) {
      const double g = gamma(a + 1.0);
      return g * std::pow(uniform_pos(), 1.0 / a);
    }
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_square(double nu) { return 2.0 * gamma(0.5 * nu); }

  // Student-t(nu) as normal / sqrt(chi_square(nu)/nu).
  double student_t(double nu) {
    const double z = normal();
    const double w = chi_square(nu);
    return student_t_from(z, w, nu);
  }

 private:
  void refill() {
    const Counter ctr = {static_cast<std::uint32_t>(block_),
                         static_cast<std::uint32_t>(block_ >> 32),
                         static_cast<std::uint32_t>(step_),
                         static_cast<std::uint32_t>(step_ >> 32)};
    buf_ = philox4x32(ctr, key_);
    ++block_;
    pos_ = 0;
  }

  Key key_{};
  std::uint64_t step_ = 0;
  std::uint64_t block_ = 0;
  Counter buf_{};
  int pos_ = 4;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace sdelab::rng

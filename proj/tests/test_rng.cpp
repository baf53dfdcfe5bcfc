#include <catch2/catch_amalgamated.hpp>

#include "sdelab/rng.hpp"
#include "test_util.hpp"

using sdelab::rng::Counter;
using sdelab::rng::Key;
using sdelab::rng::Purpose;
using sdelab::rng::Stream;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference outputs from the Random123 test vectors.
  const Counter zero = sdelab::rng::philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(zero == Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});

  const Counter ones = sdelab::rng::philox4x32(
      {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
      {0xffffffffu, 0xffffffffu});
  CHECK(ones == Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});

  const Counter pi = sdelab::rng::philox4x32(
      {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
      {0xa4093822u, 0x299f31d0u});
  CHECK(pi == Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are deterministic and addressable by step") {
  Stream a(42, 1, 3, Purpose::kNoise, 7);
  Stream b(42, 1, 3, Purpose::kNoise, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());

  // Re-seeking to a step replays its draws regardless of prior consumption.
  Stream c(42, 1, 3, Purpose::kNoise, 0);
  for (int i = 0; i < 13; ++i) (void)c.next_u32();
  c.set_step(7);
  Stream d(42, 1, 3, Purpose::kNoise, 7);
  for (int i = 0; i < 16; ++i) CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("distinct ids give distinct streams, swapped ids swap streams") {
  Stream c0(9, 0, 0, Purpose::kNoise);
  Stream c1(9, 0, 1, Purpose::kNoise);
  CHECK(c0.next_u64() != c1.next_u64());

  Stream mask(9, 0, 0, Purpose::kMask);
  Stream noise(9, 0, 0, Purpose::kNoise);
  CHECK(mask.next_u64() != noise.next_u64());

  // The stream is a function of the ids alone, so exchanging client ids
  // exchanges the draw sequences.
  Stream again(9, 0, 1, Purpose::kNoise);
  Stream first(9, 0, 0, Purpose::kNoise);
  CHECK(again.next_u64() == Stream(9, 0, 1, Purpose::kNoise).next_u64());
  CHECK(first.next_u64() == Stream(9, 0, 0, Purpose::kNoise).next_u64());
}

TEST_CASE("uniform01 lies in [0,1)") {
  Stream s(3, 0, 0, Purpose::kGeneric);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  Stream s(5, 0, 0, Purpose::kGeneric);
  const int n = 200000;
  std::vector<double> draws(n);
  for (auto& d : draws) d = s.normal();
  const double m = test_util::mean(draws);
  const double v = test_util::variance(draws);
  CHECK(std::abs(m) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(v == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("chi-square mean matches nu, including nu < 2") {
  Stream s(6, 0, 0, Purpose::kGeneric);
  for (double nu : {1.0, 2.0, 4.5}) {
    const int n = 100000;
    std::vector<double> draws(n);
    for (auto& d : draws) d = s.chi_square(nu);
    CHECK(test_util::mean(draws) == Catch::Approx(nu).epsilon(0.03));
  }
}

TEST_CASE("student-t ratio construction is odd in the normal draw") {
  for (double z : {-2.0, -0.5, 0.0, 0.3, 1.7})
    for (double w : {0.25, 1.0, 3.0})
      for (double nu : {1.0, 2.0, 5.0})
        CHECK(sdelab::rng::student_t_from(-z, w, nu) ==
              -sdelab::rng::student_t_from(z, w, nu));
}

TEST_CASE("student-t with nu=3 has the expected variance") {
  // Var t_nu = nu/(nu-2) for nu > 2.
  Stream s(7, 0, 0, Purpose::kGeneric);
  const int n = 200000;
  std::vector<double> draws(n);
  for (auto& d : draws) d = s.student_t(3.0);
  CHECK(test_util::mean(draws) == Catch::Approx(0.0).margin(0.03));
  CHECK(test_util::variance(draws) == Catch::Approx(3.0).epsilon(0.06));
}

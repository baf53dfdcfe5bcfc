#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "sdelab/schedulers.hpp"
#include "test_util.hpp"

using sdelab::NormalizationParams;
using sdelab::RandomTimeWeights;
using sdelab::SchedulerSpec;
using sdelab::rng::Purpose;
using sdelab::rng::Stream;

TEST_CASE("scheduler values") {
  CHECK(sdelab::eta_at(SchedulerSpec::constant(), 17.0) == 1.0);
  CHECK(sdelab::eta_at(SchedulerSpec::power_law(0.5), 3.0) == Catch::Approx(0.5));
  CHECK(sdelab::eta_at(SchedulerSpec::inverse_sqrt_step(), 0.0) == 1.0);
  CHECK_THROWS_AS(SchedulerSpec::power_law(0.0), std::invalid_argument);
  CHECK_THROWS_AS(SchedulerSpec::power_law(1.5), std::invalid_argument);
}

TEST_CASE("phi closed forms") {
  CHECK(sdelab::phi(SchedulerSpec::power_law(0.5), 1, 3.0) == Catch::Approx(2.0));
  CHECK(sdelab::phi(SchedulerSpec::constant(), 2, 5.0) == 5.0);
  CHECK(sdelab::phi(SchedulerSpec::power_law(0.5), 2, std::exp(1.0) - 1.0) ==
        Catch::Approx(1.0));
  // Monotone nondecreasing in t.
  double last = 0.0;
  for (double t : {0.5, 1.0, 4.0, 9.0}) {
    const double v = sdelab::phi(SchedulerSpec::power_law(0.7), 1, t);
    CHECK(v >= last);
    last = v;
  }
}

TEST_CASE("phi matches adaptive quadrature") {
  for (const auto& s : {SchedulerSpec::constant(), SchedulerSpec::power_law(0.3),
                        SchedulerSpec::power_law(0.5), SchedulerSpec::power_law(1.0),
                        SchedulerSpec::inverse_sqrt_step()}) {
    for (int i : {1, 2}) {
      for (double t : {0.7, 3.0, 42.0}) {
        const double closed = sdelab::phi(s, i, t);
        const double quad = sdelab::phi_quadrature(s, i, t);
        CHECK(closed == Catch::Approx(quad).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("robbins-monro behavior of the power-law scheduler") {
  const auto s = SchedulerSpec::power_law(0.5);
  double prev_ratio = 1.0;
  double prev_phi1 = 0.0;
  for (double t : {1e2, 1e4, 1e6}) {
    const double p1 = sdelab::phi(s, 1, t);
    const double p2 = sdelab::phi(s, 2, t);
    CHECK(p1 > prev_phi1 * 5.0);  // phi1 diverges
    const double ratio = p2 / p1;
    CHECK(ratio < prev_ratio / 2.0);  // ratio at least halves per two decades
    prev_ratio = ratio;
    prev_phi1 = p1;
  }
}

TEST_CASE("normalized stepsize") {
  NormalizationParams p;
  p.eps = 0.5;
  p.l0 = 1.0;
  p.l1 = 0.0;
  CHECK(sdelab::normalized_lr(0.1, 3.0, p) == Catch::Approx(1.0));
  CHECK(sdelab::normalized_lr(0.1, 100.0, p) == Catch::Approx(1.0));

  NormalizationParams q;
  q.eps = 0.5;
  q.l0 = 0.0;
  q.l1 = 1.0;
  CHECK(sdelab::normalized_lr(0.1, 4.0, q) == Catch::Approx(0.25));

  NormalizationParams grow = q;
  grow.omega_bar = 4.0;
  grow.sigma1sq_bar = 0.01;
  grow.sigma1sq_omega_bar = 0.04;
  grow.dim = 1000;
  grow.clients = 8;
  CHECK(sdelab::normalized_lr(0.1, 10.0, grow) <
        sdelab::normalized_lr(0.1, 1.0, grow));

  NormalizationParams degenerate;
  degenerate.l0 = degenerate.l1 = 0.0;
  CHECK_THROWS_AS(sdelab::normalized_lr(0.1, 1.0, degenerate),
                  std::invalid_argument);

  NormalizationParams simple;
  simple.form = NormalizationParams::Form::kSimple;
  CHECK(sdelab::normalized_lr(0.2, 3.0, simple) == Catch::Approx(0.05));
}

TEST_CASE("random time under a constant scheduler is uniform") {
  const auto s = SchedulerSpec::constant();
  Stream rng(5, 0, 0, Purpose::kTime);
  std::vector<double> draws(10000);
  for (auto& d : draws)
    d = sdelab::sample_random_time(s, 10.0, RandomTimeWeights::eta_weighted(), rng);
  const double ks = test_util::ks_statistic(
      draws, [](double x) { return x / 10.0; });
  CHECK(ks < 0.02);
}

TEST_CASE("random time under the power-law scheduler matches phi1") {
  const auto s = SchedulerSpec::power_law(0.5);
  const double t = 3.0;
  const double total = sdelab::phi(s, 1, t);
  Stream rng(6, 0, 0, Purpose::kTime);
  std::vector<double> draws(10000);
  for (auto& d : draws)
    d = sdelab::sample_random_time(s, t, RandomTimeWeights::eta_weighted(), rng);
  const double ks = test_util::ks_statistic(draws, [&](double x) {
    return sdelab::phi(s, 1, x) / total;
  });
  CHECK(ks < 0.02);
}

TEST_CASE("corrected weights with K = 0 reduce to the plain density") {
  const auto s = SchedulerSpec::power_law(0.5);
  Stream a(7, 0, 0, Purpose::kTime);
  Stream b(7, 0, 0, Purpose::kTime);
  for (int i = 0; i < 50; ++i) {
    a.set_step(i);
    b.set_step(i);
    const double plain = sdelab::sample_random_time(
        s, 5.0, RandomTimeWeights::eta_weighted(), a);
    const double corrected = sdelab::sample_random_time(
        s, 5.0, RandomTimeWeights::corrected(0.3, 0.0, 2.0), b);
    CHECK(plain == Catch::Approx(corrected).margin(1e-12));
  }
}

TEST_CASE("corrected random-time density matches its CDF") {
  const auto s = SchedulerSpec::power_law(0.5);
  const double t = 4.0, eta = 0.4, big_k = 0.8, ell = 1.0;
  // Positivity: eta_s * ell - eta_s^2 * eta * big_k > 0 iff eta_s < ell/(eta K),
  // true here since eta_s <= 1 < 1/(0.4*0.8).
  Stream rng(9, 0, 0, Purpose::kTime);
  std::vector<double> draws(10000);
  for (auto& d : draws)
    d = sdelab::sample_random_time(
        s, t, RandomTimeWeights::corrected(eta, big_k, ell), rng);
  const double norm = ell * sdelab::phi(s, 1, t) - eta * big_k * sdelab::phi(s, 2, t);
  const double ks = test_util::ks_statistic(draws, [&](double x) {
    return (ell * sdelab::phi(s, 1, x) - eta * big_k * sdelab::phi(s, 2, x)) /
           norm;
  });
  CHECK(ks < 0.02);
}

TEST_CASE("nonpositive densities are rejected") {
  const auto s = SchedulerSpec::constant();
  Stream rng(8, 0, 0, Purpose::kTime);
  // eta*K makes the density negative at eta_s = 1.
  CHECK_THROWS_AS(
      sdelab::sample_random_time(s, 1.0,
                                 RandomTimeWeights::corrected(2.0, 1.0, 1.0),
                                 rng),
      std::invalid_argument);
}

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "c2dn/error.hpp"
#include "c2dn/metrics.hpp"
#include "c2dn/synth.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace c2dn;
using namespace c2dn::metrics;

TEST_CASE("percentile convention") {
  CHECK(percentile({3.0, 1.0, 2.0}, 50.0) == 2.0);
  CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 50.0) == 2.5);
  CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 100.0) == 4.0);
  CHECK(percentile({5.0}, 1.0) == 5.0);
}

TEST_CASE("beta_obs") {
  CHECK(estimate_beta_obs(C2Matrix(6, 1.3)) == 0.0);
  C2Matrix two(10, 0.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = i + 1; j < 10; ++j, ++k) {
      two(i, j) = two(j, i) = (k % 2 == 0) ? 1.0 : 1.2;
    }
    two(i, i) = 50.0;
  }
  CHECK(estimate_beta_obs(two) == doctest::Approx(0.2).epsilon(1e-14));

  // Needs both decayed and undecayed entries for the P01/P99 spread.
  const auto truth = synth::generate_truth_c2(synth::DynamicsSpec::stationary(10.0, 1.0), 100, 1.0, 0.25);
  const double b = estimate_beta_obs(truth);
  CHECK(b >= 0.2);
  CHECK(b <= 0.25);

  const auto r = support::random_symmetric(12, 3);
  const double base = estimate_beta_obs(r);
  C2Matrix shifted = r, scaled = r;
  for (double& v : shifted.values()) v += 4.0;
  for (double& v : scaled.values()) v *= 3.0;
  CHECK(estimate_beta_obs(shifted) == doctest::Approx(base).epsilon(1e-12));
  CHECK(estimate_beta_obs(scaled) == doctest::Approx(3.0 * base).epsilon(1e-12));
}

TEST_CASE("contrast shift") {
  CHECK(contrast_shift(0.2, 0.2).value == 0.0);
  CHECK(contrast_shift(0.2, 0.19).value == doctest::Approx(-0.05).epsilon(1e-12));
  const auto big = contrast_shift(0.05, 0.07);
  CHECK(big.value == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(big.exceeds_bias_band);
  CHECK(!contrast_shift(0.2, 0.19).exceeds_bias_band);
  CHECK_THROWS_AS(contrast_shift(0.0, 0.1), Error);
}

TEST_CASE("residual ACF test") {
  const auto raw = support::random_symmetric(30, 1);
  const auto zero = residual_acf_test(raw, raw, 5);
  CHECK(zero.pass);
  CHECK(zero.mean_acf.empty());

  int passes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    C2Matrix a(400, 0.0), b(400, 0.0);
    for (double& v : b.values()) v = n(rng);
    passes += residual_acf_test(a, b, 20).pass ? 1 : 0;
  }
  CHECK(passes >= 90);

  C2Matrix a(64, 0.0), s(64, 0.0);
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t t = 0; t < 64; ++t) s(i, t) = std::sin(2.0 * std::numbers::pi * t / 16.0);
  }
  const auto sine = residual_acf_test(a, s, 20);
  CHECK(!sine.pass);
  CHECK(sine.mean_acf[16] > 0.7);
  CHECK(sine.bound == doctest::Approx(1.96 / 8.0));
  CHECK_THROWS_AS(residual_acf_test(a, C2Matrix(5), 2), Error);
}

TEST_CASE("ssim") {
  // Goldens from a brute-force per-window evaluation of the same inputs.
  C2Matrix x(24), z(24);
  for (std::size_t i = 0; i < 24; ++i) {
    for (std::size_t j = 0; j < 24; ++j) {
      const double di = static_cast<double>(i), dj = static_cast<double>(j);
      x(i, j) = 1.0 + 0.1 * std::sin(0.7 * (di + dj)) + 0.05 * std::cos(0.31 * di * dj);
      z(i, j) = 1.0 + 0.08 * std::cos(0.45 * (di - dj)) + 0.03 * std::sin(0.2 * di * dj);
    }
  }
  CHECK(std::abs(ssim(x, x) - 1.0) < 1e-9);
  const auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
  C2Matrix y = x;
  for (double& v : y.values()) v += 0.5 * (*hi - *lo);
  const double lum = ssim(x, y);
  CHECK(lum < 1.0);
  CHECK(std::abs(lum - 0.9904694601334504) < 1e-12);
  CHECK(std::abs(ssim(x, z) - (-0.011224332904660211)) < 1e-12);
  CHECK(std::abs(ssim(x, z, 1.0) - ssim(z, x, 1.0)) < 1e-12);
  const double s = ssim(x, z);
  CHECK((s >= -1.0 && s <= 1.0));
  CHECK_THROWS_AS(ssim(C2Matrix(6, 1.0), C2Matrix(6, 1.0)), Error);
  CHECK_THROWS_AS(ssim(x, C2Matrix(23)), Error);
}

TEST_CASE("snr and tau_star") {
  const std::vector<double> d{1, 2, 3};
  CHECK(std::abs(snr_of(d) - std::log10(3.0)) < 1e-12);
  CHECK(snr_of(std::vector<double>{3, 1, 2}) == snr_of(d));
  CHECK_THROWS_AS(snr_of(std::vector<double>{2, 2, 2}), Error);
  C2Matrix m(4, 0.0);
  m(0, 1) = 1; m(1, 2) = 2; m(2, 3) = 3;
  CHECK(std::abs(snr(m, 1) - std::log10(3.0)) < 1e-12);
  CHECK_THROWS_AS(snr(m, 0), Error);
  CHECK_THROWS_AS(snr(m, 4), Error);

  for (double tc : {1.0, 2.0, 7.0, 10.0, 33.3}) {
    CHECK(find_tau_star(fit::KwwParams{1.0, 0.2, tc, 1.0}) ==
          static_cast<std::size_t>(std::max(1.0, std::ceil(tc / 2.0))));
  }
  const auto g2 = corr::extract_g2(
      synth::generate_truth_c2(synth::DynamicsSpec::stationary(21.0, 1.0), 100));
  CHECK(find_tau_star(g2) == 11);
}

TEST_CASE("ensemble variance") {
  const auto a = support::random_symmetric(8, 1);
  const std::vector<C2Matrix> same{a, a, a};
  CHECK(ensemble_variance(same) == 0.0);
  C2Matrix b = a;
  for (double& v : b.values()) v += 0.3;
  const std::vector<C2Matrix> pair{a, b};
  CHECK(ensemble_variance(pair) == doctest::Approx(0.09 / 4.0).epsilon(1e-12));
  const auto c = support::random_symmetric(8, 2);
  const std::vector<C2Matrix> p1{a, b, c}, p2{c, a, b};
  CHECK(ensemble_variance(p1) == doctest::Approx(ensemble_variance(p2)).epsilon(1e-14));
  CHECK_THROWS_AS(ensemble_variance(std::vector<C2Matrix>{a}), Error);

  const auto rep = ensemble_report({a, c}, {{a, b}, {c, c}});
  CHECK(rep.per_sample_variance[1] == 0.0);
  CHECK(rep.ratio_per_sample.size() == 2);
  CHECK(rep.p10_ratio <= rep.median_ratio);
  CHECK(rep.median_ratio <= rep.p90_ratio);
}

TEST_CASE("evaluate on identical maps") {
  const auto t = synth::generate_truth_c2(synth::DynamicsSpec::stationary(6.0, 1.0), 40);
  auto raw = corr::repair_diagonal(t);
  const auto rep = evaluate(raw, raw);
  CHECK(rep.delta_beta_rel == 0.0);
  CHECK(rep.ssim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.acf_pass);
  CHECK(rep.acf_bound == doctest::Approx(1.96 / std::sqrt(40.0)));
  CHECK(rep.tau_star == 3);
}

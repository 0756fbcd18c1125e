#include <doctest.h>

#include <cmath>
#include <vector>

#include "fibinet/errors.hpp"
#include "fibinet/metrics.hpp"
#include "fibinet/numeric.hpp"
#include "oracles.hpp"

using namespace fibinet::metrics;

TEST_SUITE("metrics") {

TEST_CASE("auc examples") {
  const std::vector<double> s{0.9, 0.1};
  const std::vector<std::uint8_t> y{1, 0};
  CHECK(auc({s, y}) == 1.0);

  const std::vector<double> flat(6, 0.3);
  const std::vector<std::uint8_t> mix{1, 0, 1, 0, 0, 1};
  CHECK(auc({flat, mix}) == 0.5);

  const std::vector<std::uint8_t> ones(6, 1);
  CHECK_THROWS_AS(auc({flat, ones}), fibinet::MetricUndefined);
}

TEST_CASE("auc matches pair counting") {
  fibinet::numeric::Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(200);
    std::vector<std::uint8_t> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
      s[i] = trial % 2 ? static_cast<double>(rng.below(7)) : rng.uniform();
      y[i] = rng.bernoulli(0.4);
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(std::abs(auc({s, y}) - oracle::auc_pairs(s, y)) <= 1e-12);
  }
}

TEST_CASE("logloss") {
  const std::vector<double> half{0.5};
  const std::vector<std::uint8_t> one{1};
  CHECK(std::abs(logloss({half, one}) - std::log(2.0)) <= 1e-12);

  const std::vector<double> exact{1.0, 0.0};
  const std::vector<std::uint8_t> y{1, 0};
  const double ll = logloss({exact, y});
  CHECK(ll >= 0.0);
  CHECK(ll < 1e-14);

  fibinet::numeric::Rng rng(8);
  std::vector<double> p(300);
  std::vector<std::uint8_t> labels(300);
  for (std::size_t i = 0; i < 300; ++i) {
    p[i] = rng.uniform();
    labels[i] = rng.bernoulli(0.5);
  }
  CHECK(std::abs(logloss({p, labels}) - oracle::logloss_loop(p, labels)) <= 1e-12);

  CHECK_THROWS_AS(logloss({std::span<const double>{}, std::span<const std::uint8_t>{}}),
                  fibinet::MetricUndefined);
}

TEST_CASE("auc monotone invariance") {
  fibinet::numeric::Rng rng(4);
  std::vector<double> s(100);
  std::vector<std::uint8_t> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    s[i] = rng.uniform(0.01, 0.99);
    y[i] = i % 3 == 0;
  }
  const ScoredSet set{s, y};
  CHECK(auc_monotone_invariance_check(set, [](double x) { return x; }));
  CHECK(auc_monotone_invariance_check(set, [](double x) { return x * x * x; }));
  // Piecewise-linear strictly increasing map with random positive slopes.
  std::vector<double> slopes(10);
  for (double& a : slopes) a = rng.uniform(0.1, 5.0);
  CHECK(auc_monotone_invariance_check(set, [&](double x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < slopes.size(); ++k) {
      const double lo = k / 10.0;
      acc += slopes[k] * std::clamp(x - lo, 0.0, 0.1);
    }
    return acc;
  }));
}

}  // TEST_SUITE

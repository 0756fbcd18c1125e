#include "fibinet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fibinet/errors.hpp"
#include "fibinet/numeric.hpp"

namespace fibinet::metrics {

namespace {

void check_lengths(const ScoredSet& set) {
  if (set.scores.size() != set.labels.size()) {
    throw ShapeError("scored set: " + std::to_string(set.scores.size()) + " scores vs " +
                     std::to_string(set.labels.size()) + " labels");
  }
}

}  // namespace

double auc(ScoredSet set) {
  check_lengths(set);
  const std::size_t n = set.scores.size();
  std::size_t positives = 0;
  for (auto y : set.labels) positives += (y != 0);
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricUndefined("auc requires both classes (positives=" + std::to_string(positives) +
                          ", negatives=" + std::to_string(negatives) + ")");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });

  // Sum of 1-based average ranks over the positives.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && set.scores[order[j + 1]] == set.scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (set.labels[order[t]] != 0) positive_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double logloss(ScoredSet set) {
  check_lengths(set);
  if (set.scores.empty()) throw MetricUndefined("logloss of an empty set");
  constexpr double eps = numeric::kProbabilityEpsilon;
  double total = 0.0;
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    const double p = std::clamp(set.scores[i], eps, 1.0 - eps);
    total += set.labels[i] != 0 ? std::log(p) : std::log1p(-p);
  }
  return -total / static_cast<double>(set.scores.size());
}

bool auc_monotone_invariance_check(ScoredSet set,
                                   const std::function<double(double)>& transform) {
  std::vector<double> mapped(set.scores.size());
  std::transform(set.scores.begin(), set.scores.end(), mapped.begin(), transform);
  return auc(set) == auc({mapped, set.labels});
}

}  // namespace fibinet::metrics

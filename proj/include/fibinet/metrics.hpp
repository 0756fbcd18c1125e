#pragma once

#include <cstdint>
#include <functional>
#include <span>

namespace fibinet::metrics {

/// Parallel score/label arrays. Views only; the caller owns the storage.
struct ScoredSet {
  std::span<const double> scores;
  std::span<const std::uint8_t> labels;
};

/// Area under the ROC curve as the Mann-Whitney rank-sum statistic, ties
/// resolved with average ranks. Throws MetricUndefined unless both classes
/// are present.
double auc(ScoredSet set);

/// Mean binary cross-entropy with scores clamped to [1e-15, 1 - 1e-15].
/// Throws MetricUndefined on an empty set.
double logloss(ScoredSet set);

/// True when auc is unchanged by `transform`, which must be strictly increasing.
bool auc_monotone_invariance_check(ScoredSet set, const std::function<double(double)>& transform);

}  // namespace fibinet::metrics

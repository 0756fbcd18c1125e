#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fibinet/data.hpp"
#include "fibinet/model.hpp"

namespace fibinet::train {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments shaped like the parameters, plus the step count.
struct AdamState {
  AdamOptions options;
  model::ModelParams m;
  model::ModelParams v;
  std::uint64_t t = 0;

  AdamState(const model::ModelParams& like, AdamOptions opts)
      : options(opts), m(like.zeros_like()), v(like.zeros_like()) {}
};

/// Bias-corrected Adam update of every parameter block; increments t.
void adam_step(model::ModelParams& params, const model::GradientTape& tape, AdamState& state);

/// Scalar form of the same recurrence, for a single parameter.
struct ScalarAdam {
  AdamOptions options;
  double m = 0.0;
  double v = 0.0;
  std::uint64_t t = 0;

  double step(double theta, double grad);
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 1000;
  AdamOptions adam{};
  std::size_t eval_every = 1;
  /// Evaluations without improvement in validation AUC (ties broken by logloss)
  /// before stopping.
  std::size_t patience = 2;
  std::uint64_t seed = 42;
  /// Wall-clock seconds in the metric log; off keeps logs byte-reproducible.
  bool record_time = false;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;
  double auc = 0.0;
  double logloss = 0.0;
  double seconds = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  model::ModelParams best;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_valid_auc = 0.0;
  double best_valid_logloss = 0.0;
  std::uint64_t steps = 0;
};

/// Mini-batch Adam with validation-AUC model selection and early stopping.
/// Parameters are initialized from derive_seed(seed, "init").
TrainResult train(const model::Network& network, const data::Dataset& train_set,
                  const data::Dataset& valid_set, const TrainConfig& config);
/// Same loop starting from the given parameters.
TrainResult train(const model::Network& network, model::ModelParams initial,
                  const data::Dataset& train_set, const data::Dataset& valid_set,
                  const TrainConfig& config);

struct Evaluation {
  double auc = 0.5;
  double logloss = 0.0;
};

/// Inference-mode metrics over a dataset. AUC is NaN when only one class is present.
Evaluation evaluate(const model::Network& network, const model::ModelParams& params,
                    const data::Dataset& rows, std::size_t batch_size = 4096);

void write_metric_csv(std::ostream& out, const std::vector<EpochRecord>& log);

enum class BlockStatus { kPass, kFail, kUnused };

struct BlockCheck {
  std::string name;
  double max_relative_error = 0.0;
  BlockStatus status = BlockStatus::kPass;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  bool passed() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error of near-zero gradients.
  double floor = 1e-6;
  std::size_t rows = 6;
  std::uint32_t buckets = 3;
  /// Instances with a relu input nearer zero than this are redrawn.
  double kink_margin = 1e-3;
};

/// Compares hand-written gradients with central differences on a tiny random
/// instance of `config` (dropout forced off). Blocks that cannot influence
/// the output are reported as unused after confirming a zero gradient.
/// Instances that put a relu input within `kink_margin` of zero are redrawn.
GradCheckReport grad_check(model::ModelConfig config, std::uint64_t seed,
                           const GradCheckOptions& options = {});

/// |a − n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

struct AblationRow {
  std::string variant;
  double auc = 0.5;
  double logloss = 0.0;
};

/// Config for each of BASE, NO-SE, NO-BI, FM, FNN derived from `base`.
std::vector<std::pair<std::string, model::ModelConfig>> ablation_variants(
    const model::ModelConfig& base);

/// Trains every variant under the same seeds and budget, then scores each
/// variant's selected parameters on the test set.
std::vector<AblationRow> run_ablation(const model::ModelConfig& base,
                                      const data::FieldSchema& schema,
                                      const data::Dataset& train_set,
                                      const data::Dataset& valid_set,
                                      const data::Dataset& test_set, const TrainConfig& config);

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace fibinet::train

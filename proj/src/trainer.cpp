#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>

#include "fibinet/errors.hpp"
#include "fibinet/metrics.hpp"
#include "fibinet/train.hpp"

namespace fibinet::train {

namespace {

std::vector<numeric::DenseMatrix*> blocks_of(model::ModelParams& p) {
  std::vector<numeric::DenseMatrix*> out;
  p.for_each_block([&](const std::string&, numeric::DenseMatrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const numeric::DenseMatrix*> blocks_of(const model::ModelParams& p) {
  std::vector<const numeric::DenseMatrix*> out;
  p.for_each_block([&](const std::string&, const numeric::DenseMatrix& m) { out.push_back(&m); });
  return out;
}

std::string format_double(double x, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

}  // namespace

void adam_step(model::ModelParams& params, const model::GradientTape& tape, AdamState& state) {
  auto theta = blocks_of(params);
  auto grads = blocks_of(tape.grads());
  auto m = blocks_of(state.m);
  auto v = blocks_of(state.v);
  if (grads.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw ShapeError("adam_step: gradient tape has " + std::to_string(grads.size()) +
                     " blocks, parameters have " + std::to_string(theta.size()));
  }
  for (std::size_t b = 0; b < theta.size(); ++b) {
    if (grads[b]->rows() != theta[b]->rows() || grads[b]->cols() != theta[b]->cols()) {
      throw ShapeError("adam_step: block " + std::to_string(b) + " gradient " +
                       grads[b]->shape_string() + " vs parameter " + theta[b]->shape_string());
    }
  }

  const auto& o = state.options;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t b = 0; b < theta.size(); ++b) {
    auto th = theta[b]->data();
    const auto g = grads[b]->data();
    auto mb = m[b]->data();
    auto vb = v[b]->data();
    for (std::size_t i = 0; i < th.size(); ++i) {
      mb[i] = o.beta1 * mb[i] + (1.0 - o.beta1) * g[i];
      vb[i] = o.beta2 * vb[i] + (1.0 - o.beta2) * g[i] * g[i];
      th[i] -= o.learning_rate * (mb[i] / c1) / (std::sqrt(vb[i] / c2) + o.epsilon);
    }
  }
}

double ScalarAdam::step(double theta, double grad) {
  t += 1;
  m = options.beta1 * m + (1.0 - options.beta1) * grad;
  v = options.beta2 * v + (1.0 - options.beta2) * grad * grad;
  const double mhat = m / (1.0 - std::pow(options.beta1, static_cast<double>(t)));
  const double vhat = v / (1.0 - std::pow(options.beta2, static_cast<double>(t)));
  return theta - options.learning_rate * mhat / (std::sqrt(vhat) + options.epsilon);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be at least 1");
  if (eval_every < 1) throw ConfigError("train.eval_every", "must be at least 1");
  if (patience < 1) throw ConfigError("train.patience", "must be at least 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw ConfigError("train.epsilon", "must be positive");
}

Evaluation evaluate(const model::Network& network, const model::ModelParams& params,
                    const data::Dataset& rows, std::size_t batch_size) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  scores.reserve(rows.size());
  labels.reserve(rows.size());
  for (const auto& batch : data::batches(rows, batch_size, std::nullopt)) {
    const auto preds = network.predict(batch, params);
    scores.insert(scores.end(), preds.begin(), preds.end());
    labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
  }
  Evaluation ev;
  ev.logloss = metrics::logloss({scores, labels});
  try {
    ev.auc = metrics::auc({scores, labels});
  } catch (const MetricUndefined&) {
    ev.auc = std::numeric_limits<double>::quiet_NaN();
  }
  return ev;
}

TrainResult train(const model::Network& network, const data::Dataset& train_set,
                  const data::Dataset& valid_set, const TrainConfig& config) {
  numeric::Rng init_rng(numeric::derive_seed(config.seed, "init"));
  return train(network, network.initialize(init_rng), train_set, valid_set, config);
}

TrainResult train(const model::Network& network, model::ModelParams initial,
                  const data::Dataset& train_set, const data::Dataset& valid_set,
                  const TrainConfig& config) {
  config.validate();
  using Clock = std::chrono::steady_clock;

  TrainResult result;
  result.best = initial;
  if (config.epochs == 0) {
    if (!valid_set.empty()) {
      const auto ev = evaluate(network, initial, valid_set);
      result.best_valid_auc = ev.auc;
      result.best_valid_logloss = ev.logloss;
    }
    return result;
  }
  if (train_set.empty()) throw ConfigError("data.train", "training set is empty");
  if (valid_set.empty()) throw ConfigError("data.valid", "validation set is empty");

  model::ModelParams params = std::move(initial);
  AdamState adam(params, config.adam);
  numeric::Rng dropout_rng(numeric::derive_seed(config.seed, "dropout"));
  const std::uint64_t shuffle_seed = numeric::derive_seed(config.seed, "shuffle");

  bool have_best = false;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = Clock::now();
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    scores.reserve(train_set.size());
    labels.reserve(train_set.size());
    double loss_sum = 0.0;

    const auto epoch_batches = data::batches(train_set, config.batch_size,
                                             numeric::derive_seed(shuffle_seed, std::to_string(epoch)));
    for (std::size_t b = 0; b < epoch_batches.size(); ++b) {
      const auto& batch = epoch_batches[b];
      auto trace = network.forward(batch, params, true, &dropout_rng);
      const double loss = metrics::logloss({trace.predictions, batch.labels});
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(result.steps + 1) + " (batch " +
                           std::to_string(b) + ")");
      }
      loss_sum += loss * static_cast<double>(batch.size);
      scores.insert(scores.end(), trace.predictions.begin(), trace.predictions.end());
      labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
      const auto tape = network.backward(trace, batch.labels, params);
      adam_step(params, tape, adam);
      ++result.steps;
    }

    EpochRecord train_rec{epoch, "train", std::numeric_limits<double>::quiet_NaN(),
                          loss_sum / static_cast<double>(train_set.size()), 0.0};
    try {
      train_rec.auc = metrics::auc({scores, labels});
    } catch (const MetricUndefined&) {
    }

    const bool evaluate_now = epoch % config.eval_every == 0 || epoch == config.epochs;
    std::optional<Evaluation> valid;
    if (evaluate_now) valid = evaluate(network, params, valid_set);
    const double seconds =
        config.record_time ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
    train_rec.seconds = seconds;
    result.log.push_back(train_rec);
    if (!valid) continue;
    result.log.push_back({epoch, "valid", valid->auc, valid->logloss, seconds});

    const bool improved =
        !have_best || (std::isnan(valid->auc) ? valid->logloss < result.best_valid_logloss
                                              : valid->auc > result.best_valid_auc ||
                                                    (valid->auc == result.best_valid_auc &&
                                                     valid->logloss < result.best_valid_logloss));
    if (improved) {
      have_best = true;
      stale = 0;
      result.best = params;
      result.best_epoch = epoch;
      result.best_valid_auc = valid->auc;
      result.best_valid_logloss = valid->logloss;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

void write_metric_csv(std::ostream& out, const std::vector<EpochRecord>& log) {
  out << "epoch,split,auc,logloss,seconds\n";
  for (const auto& rec : log) {
    out << rec.epoch << ',' << rec.split << ',' << format_double(rec.auc, "%.12f") << ','
        << format_double(rec.logloss, "%.12f") << ',' << format_double(rec.seconds, "%.3f") << '\n';
  }
}

}  // namespace fibinet::train

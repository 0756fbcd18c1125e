#include <algorithm>
#include <cmath>
#include <limits>

#include "fibinet/train.hpp"

namespace fibinet::train {

namespace {

constexpr std::size_t kMaxDraws = 100;

model::ModelParams draw_params(const model::Network& net, numeric::Rng& rng) {
  auto params = net.initialize(rng);
  // Unit-scale parameters keep every path numerically visible. Positive
  // embeddings and SENET weights hold every excitation output above zero,
  // so the reweighted path carries gradient for every field.
  params.for_each_block([&](const std::string& name, numeric::DenseMatrix& m) {
    double lo = -1.0, hi = 1.0;
    if (name.starts_with("embedding.")) {
      lo = 0.05;
      hi = 0.5;
    } else if (name.starts_with("senet.")) {
      lo = 0.1;
    }
    for (double& x : m.data()) x = rng.uniform(lo, hi);
  });
  return params;
}

data::ExampleBatch draw_batch(std::size_t num_fields, const GradCheckOptions& options,
                              numeric::Rng& rng) {
  data::Dataset rows;
  for (std::size_t r = 0; r < options.rows; ++r) {
    data::Example ex;
    ex.label = rng.bernoulli(0.5) ? 1 : 0;
    for (std::size_t i = 0; i < num_fields; ++i) {
      ex.indices.push_back(static_cast<std::uint32_t>(rng.below(options.buckets)));
      ex.values.push_back(rng.uniform(0.5, 1.5));
    }
    rows.push_back(std::move(ex));
  }
  return data::ExampleBatch::from_examples(rows);
}

double min_relu_input(const model::ForwardTrace& trace) {
  double m = std::numeric_limits<double>::infinity();
  auto scan = [&](const numeric::DenseMatrix& pre) {
    for (double x : pre.data()) m = std::min(m, std::abs(x));
  };
  scan(trace.senet_pre1);
  scan(trace.senet_pre2);
  for (const auto& pre : trace.dnn_pre) scan(pre);
  return m;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

bool GradCheckReport::passed() const {
  return std::none_of(blocks.begin(), blocks.end(),
                      [](const BlockCheck& b) { return b.status == BlockStatus::kFail; });
}

GradCheckReport grad_check(model::ModelConfig config, std::uint64_t seed,
                           const GradCheckOptions& options) {
  config.dropout = 0.0;
  const auto schema = data::FieldSchema::uniform(config.num_fields, options.buckets);
  const model::Network net(config, schema);

  numeric::Rng rng(seed);
  model::ModelParams params;
  data::ExampleBatch batch;
  // Central differences are meaningless across a relu kink, so redraw any
  // instance with a relu input closer to zero than the margin.
  for (std::size_t attempt = 0;; ++attempt) {
    params = draw_params(net, rng);
    batch = draw_batch(config.num_fields, options, rng);
    if (attempt + 1 >= kMaxDraws || min_relu_input(net.forward(batch, params, false)) > options.kink_margin) {
      break;
    }
  }

  auto trace = net.forward(batch, params, false);
  const auto tape = net.backward(trace, batch.labels, params);
  auto analytic = tape.grads();
  const auto active = net.active_blocks(params);

  GradCheckReport report;
  params.for_each_block([&](const std::string& name, numeric::DenseMatrix& block) {
    const numeric::DenseMatrix& grad = *analytic.find_block(name);
    BlockCheck check{name, 0.0, BlockStatus::kPass};
    if (std::find(active.begin(), active.end(), name) == active.end()) {
      check.status = BlockStatus::kUnused;
      for (double g : grad.data()) {
        check.max_relative_error = std::max(check.max_relative_error, std::abs(g));
      }
      if (check.max_relative_error != 0.0) check.status = BlockStatus::kFail;
      report.blocks.push_back(check);
      return;
    }
    const auto numeric = numeric::finite_diff_grad([&] { return net.loss(batch, params); }, block,
                                                   options.step);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      check.max_relative_error =
          std::max(check.max_relative_error,
                   relative_error(grad.data()[i], numeric.data()[i], options.floor));
    }
    if (!(check.max_relative_error < options.tolerance)) check.status = BlockStatus::kFail;
    report.blocks.push_back(check);
  });
  return report;
}

}  // namespace fibinet::train

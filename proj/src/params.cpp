#include <string>

#include "fibinet/errors.hpp"
#include "fibinet/model.hpp"

namespace fibinet::model {

ModelParams ModelParams::initialize(const ModelConfig& config, const data::FieldSchema& schema,
                                    numeric::Rng& rng) {
  config.validate();
  if (schema.num_fields() != config.num_fields) {
    throw ConfigError("model.fields", "config declares " + std::to_string(config.num_fields) +
                                          " fields but the schema has " +
                                          std::to_string(schema.num_fields()));
  }
  const std::size_t f = config.num_fields;
  const std::size_t k = config.embedding_dim;
  const auto arch = Architecture::resolve(config);

  ModelParams p;
  for (const auto& field : schema.fields()) {
    p.embeddings.push_back(numeric::uniform_matrix(rng, field.bucket_count, k, 0.1));
    p.linear.emplace_back(field.bucket_count, 1);
  }
  const std::size_t hidden = config.senet_hidden();
  p.senet_w1 = numeric::xavier_uniform(rng, hidden, f);
  p.senet_w2 = numeric::xavier_uniform(rng, f, hidden);

  const std::size_t count = config.bilinear_matrices_per_path();
  for (std::size_t m = 0; m < count; ++m) p.bilinear_p.push_back(numeric::xavier_uniform(rng, k, k));
  if (!config.share_bilinear) {
    for (std::size_t m = 0; m < count; ++m) {
      p.bilinear_q.push_back(numeric::xavier_uniform(rng, k, k));
    }
  }

  if (arch.deep) {
    std::size_t width = arch.combined_width;
    for (std::size_t units : config.hidden_units) {
      p.dnn_weights.push_back(numeric::xavier_uniform(rng, units, width));
      p.dnn_biases.emplace_back(units, 1);
      width = units;
    }
    p.head_weight = numeric::xavier_uniform(rng, 1, width);
  }
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each_block([](const std::string&, DenseMatrix& m) { m.fill(0.0); });
  return z;
}

namespace {

template <typename Params, typename Fn>
void visit_blocks(Params& p, Fn&& fn) {
  auto visit = [&](const std::string& name, auto& m) {
    if (m.size() > 0) fn(name, m);
  };
  for (std::size_t i = 0; i < p.embeddings.size(); ++i) visit("embedding." + std::to_string(i), p.embeddings[i]);
  for (std::size_t i = 0; i < p.linear.size(); ++i) visit("linear." + std::to_string(i), p.linear[i]);
  visit("bias", p.bias);
  visit("senet.w1", p.senet_w1);
  visit("senet.w2", p.senet_w2);
  for (std::size_t i = 0; i < p.bilinear_p.size(); ++i) visit("bilinear_p." + std::to_string(i), p.bilinear_p[i]);
  for (std::size_t i = 0; i < p.bilinear_q.size(); ++i) visit("bilinear_q." + std::to_string(i), p.bilinear_q[i]);
  for (std::size_t l = 0; l < p.dnn_weights.size(); ++l) {
    visit("dnn.w." + std::to_string(l), p.dnn_weights[l]);
    visit("dnn.b." + std::to_string(l), p.dnn_biases[l]);
  }
  visit("head.w", p.head_weight);
  if (p.head_weight.size() > 0) visit("head.b", p.head_bias);
}

}  // namespace

void ModelParams::for_each_block(
    const std::function<void(const std::string&, DenseMatrix&)>& fn) {
  visit_blocks(*this, fn);
}

void ModelParams::for_each_block(
    const std::function<void(const std::string&, const DenseMatrix&)>& fn) const {
  visit_blocks(*this, fn);
}

DenseMatrix* ModelParams::find_block(std::string_view name) {
  DenseMatrix* found = nullptr;
  for_each_block([&](const std::string& n, DenseMatrix& m) {
    if (n == name) found = &m;
  });
  return found;
}

std::size_t ModelParams::total_size() const {
  std::size_t total = 0;
  for_each_block([&](const std::string&, const DenseMatrix& m) { total += m.size(); });
  return total;
}

std::size_t ModelParams::bilinear_parameter_count(bool reweighted_path) const {
  const auto& mats = (reweighted_path && !bilinear_q.empty()) ? bilinear_q : bilinear_p;
  std::size_t total = 0;
  for (const auto& m : mats) total += m.size();
  return total;
}

}  // namespace fibinet::model

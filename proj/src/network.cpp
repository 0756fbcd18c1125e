#include <algorithm>
#include <cmath>
#include <string>

#include "fibinet/errors.hpp"
#include "fibinet/metrics.hpp"
#include "fibinet/model.hpp"

namespace fibinet::model {

namespace {

using Span = std::span<double>;
using CSpan = std::span<const double>;

/// out += m · x
void matvec_add(const DenseMatrix& m, CSpan x, Span out) {
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] += numeric::inner(m.row(r), x);
}

/// proj = Wᵀ·vi, out = proj ⊙ vj
void bilinear_into(CSpan vi, CSpan vj, const DenseMatrix& w, Span proj, Span out) {
  std::fill(proj.begin(), proj.end(), 0.0);
  numeric::matvec_transposed_add(w, vi, proj);
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = proj[t] * vj[t];
}

void hadamard_into(CSpan a, CSpan b, Span out) {
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = a[t] * b[t];
}

const std::vector<DenseMatrix>& reweighted_matrices(const ModelParams& params) {
  return params.bilinear_q.empty() ? params.bilinear_p : params.bilinear_q;
}

std::vector<DenseMatrix>& reweighted_matrices(ModelParams& params) {
  return params.bilinear_q.empty() ? params.bilinear_p : params.bilinear_q;
}

/// One interaction path over a row: writes n·k outputs and, for bilinear
/// paths, the n·k left projections.
void interact_row(CSpan emb, std::size_t f, std::size_t k, FieldType type,
                  const std::vector<DenseMatrix>* matrices, Span out, Span proj) {
  std::size_t pair = 0;
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = i + 1; j < f; ++j, ++pair) {
      const CSpan vi = emb.subspan(i * k, k);
      const CSpan vj = emb.subspan(j * k, k);
      const Span o = out.subspan(pair * k, k);
      if (matrices) {
        const auto& w = (*matrices)[layers::bilinear_index(type, i, j, pair, f)];
        bilinear_into(vi, vj, w, proj.subspan(pair * k, k), o);
      } else {
        hadamard_into(vi, vj, o);
      }
    }
  }
}

/// Backward of interact_row: accumulates into d_emb and the matrix gradients.
void interact_row_backward(CSpan emb, std::size_t f, std::size_t k, FieldType type,
                           const std::vector<DenseMatrix>* matrices,
                           std::vector<DenseMatrix>* matrix_grads, CSpan proj, CSpan d_out,
                           Span d_emb, Span scratch) {
  std::size_t pair = 0;
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = i + 1; j < f; ++j, ++pair) {
      const CSpan vi = emb.subspan(i * k, k);
      const CSpan vj = emb.subspan(j * k, k);
      const CSpan dp = d_out.subspan(pair * k, k);
      Span dvi = d_emb.subspan(i * k, k);
      Span dvj = d_emb.subspan(j * k, k);
      if (matrices) {
        const std::size_t m = layers::bilinear_index(type, i, j, pair, f);
        const CSpan u = proj.subspan(pair * k, k);
        for (std::size_t t = 0; t < k; ++t) {
          dvj[t] += dp[t] * u[t];
          scratch[t] = dp[t] * vj[t];
        }
        numeric::outer_add((*matrix_grads)[m], vi, scratch.first(k));
        matvec_add((*matrices)[m], scratch.first(k), dvi);
      } else {
        for (std::size_t t = 0; t < k; ++t) {
          dvi[t] += dp[t] * vj[t];
          dvj[t] += dp[t] * vi[t];
        }
      }
    }
  }
}

}  // namespace

namespace layers {

DenseMatrix embed(const data::ExampleBatch& batch, std::size_t row, const ModelParams& params) {
  const std::size_t f = batch.num_fields;
  if (params.embeddings.size() != f) throw ShapeError("embed: field count mismatch");
  const std::size_t k = params.embeddings.front().cols();
  DenseMatrix e(f, k);
  for (std::size_t i = 0; i < f; ++i) {
    const auto& table = params.embeddings[i];
    const std::uint32_t idx = batch.index(row, i);
    if (idx >= table.rows()) {
      throw BoundsError("embed: field " + std::to_string(i) + " index " + std::to_string(idx) +
                        " outside " + std::to_string(table.rows()) + " buckets");
    }
    const double value = batch.value(row, i);
    const auto src = table.row(idx);
    auto dst = e.row(i);
    for (std::size_t t = 0; t < k; ++t) dst[t] = value * src[t];
  }
  return e;
}

DenseVector squeeze(const DenseMatrix& e) {
  DenseVector z(e.rows());
  const double inv_k = 1.0 / static_cast<double>(e.cols());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    double s = 0.0;
    for (double x : e.row(i)) s += x;
    z[i] = s * inv_k;
  }
  return z;
}

DenseVector excitation(const DenseVector& z, const DenseMatrix& w1, const DenseMatrix& w2) {
  if (w2.cols() != w1.rows() || w2.rows() != z.len()) {
    throw ShapeError("excitation: W1 " + w1.shape_string() + ", W2 " + w2.shape_string() +
                     ", Z [" + std::to_string(z.len()) + "]");
  }
  return numeric::relu(numeric::matvec(w2, numeric::relu(numeric::matvec(w1, z))));
}

DenseMatrix reweight(const DenseVector& a, const DenseMatrix& e) {
  if (a.len() != e.rows()) throw ShapeError("reweight: weight count differs from field count");
  DenseMatrix v(e.rows(), e.cols());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    for (std::size_t t = 0; t < e.cols(); ++t) v(i, t) = a[i] * e(i, t);
  }
  return v;
}

DenseVector bilinear_pair(std::span<const double> vi, std::span<const double> vj,
                          const DenseMatrix& w) {
  if (w.rows() != vi.size() || w.cols() != vj.size()) {
    throw ShapeError("bilinear_pair: W " + w.shape_string() + " vs embeddings [" +
                     std::to_string(vi.size()) + "], [" + std::to_string(vj.size()) + "]");
  }
  DenseVector proj(w.cols());
  DenseVector out(w.cols());
  bilinear_into(vi, vj, w, proj.span(), out.span());
  return out;
}

std::size_t bilinear_index(FieldType type, std::size_t i, std::size_t /*j*/, std::size_t pair,
                           std::size_t /*num_fields*/) {
  switch (type) {
    case FieldType::kAll: return 0;
    case FieldType::kEach: return i;
    case FieldType::kInteraction: return pair;
  }
  return 0;
}

DenseMatrix interact(const DenseMatrix& emb, FieldType type,
                     std::span<const DenseMatrix> matrices) {
  const std::size_t f = emb.rows();
  const std::size_t k = emb.cols();
  const std::size_t n = f * (f - 1) / 2;
  std::vector<DenseMatrix> owned(matrices.begin(), matrices.end());
  for (const auto& w : owned) {
    if (w.rows() != k || w.cols() != k) throw ShapeError("interact: bilinear matrix " + w.shape_string());
  }
  DenseMatrix out(n, k);
  DenseMatrix proj(n, k);
  interact_row(emb.data(), f, k, type, owned.empty() ? nullptr : &owned, out.data(), proj.data());
  return out;
}

DenseVector combine(const DenseMatrix& p, const DenseMatrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw ShapeError("combine: p " + p.shape_string() + " vs q " + q.shape_string());
  }
  std::vector<double> c(p.data().begin(), p.data().end());
  c.insert(c.end(), q.data().begin(), q.data().end());
  return DenseVector(std::move(c));
}

double shallow_head(const DenseVector& c) {
  double s = 0.0;
  for (double x : c.span()) s += x;
  return s;
}

double dnn_forward(const DenseVector& input, const ModelParams& params, double dropout_rate,
                   numeric::Rng* dropout_rng) {
  DenseVector a = input;
  for (std::size_t l = 0; l < params.dnn_weights.size(); ++l) {
    const auto& w = params.dnn_weights[l];
    if (w.cols() != a.len()) {
      throw ShapeError("dnn layer " + std::to_string(l) + ": W " + w.shape_string() +
                       " vs input [" + std::to_string(a.len()) + "]");
    }
    DenseVector pre = numeric::matvec(w, a);
    for (std::size_t u = 0; u < pre.len(); ++u) pre[u] += params.dnn_biases[l](u, 0);
    a = numeric::relu(pre);
    if (dropout_rng && dropout_rate > 0.0) {
      const double scale = 1.0 / (1.0 - dropout_rate);
      for (std::size_t u = 0; u < a.len(); ++u) {
        a[u] *= dropout_rng->bernoulli(1.0 - dropout_rate) ? scale : 0.0;
      }
    }
  }
  if (params.head_weight.cols() != a.len()) throw ShapeError("dnn head: width mismatch");
  return numeric::inner(params.head_weight.row(0), a.span()) + params.head_bias(0, 0);
}

}  // namespace layers

Network::Network(ModelConfig config, data::FieldSchema schema)
    : config_(std::move(config)), arch_(Architecture::resolve(config_)), schema_(std::move(schema)) {
  config_.validate();
  if (schema_.num_fields() != config_.num_fields) {
    throw ConfigError("model.fields", "config declares " + std::to_string(config_.num_fields) +
                                          " fields but the schema has " +
                                          std::to_string(schema_.num_fields()));
  }
}

void Network::check_batch(const data::ExampleBatch& batch, const ModelParams& params) const {
  const std::size_t f = config_.num_fields;
  if (batch.size > 0 && batch.num_fields != f) {
    throw ShapeError("batch has " + std::to_string(batch.num_fields) + " fields, model expects " +
                     std::to_string(f));
  }
  if (params.embeddings.size() != f || params.linear.size() != f) {
    throw ShapeError("parameters do not match the model's field count");
  }
  for (std::size_t r = 0; r < batch.size; ++r) {
    for (std::size_t i = 0; i < f; ++i) {
      if (batch.index(r, i) >= params.embeddings[i].rows()) {
        throw BoundsError("row " + std::to_string(r) + " field " + std::to_string(i) + ": index " +
                          std::to_string(batch.index(r, i)) + " outside " +
                          std::to_string(params.embeddings[i].rows()) + " buckets");
      }
    }
  }
}

ForwardTrace Network::forward(const data::ExampleBatch& batch, const ModelParams& params,
                              bool training, numeric::Rng* dropout_rng) const {
  check_batch(batch, params);
  const std::size_t n_rows = batch.size;
  const std::size_t f = config_.num_fields;
  const std::size_t k = config_.embedding_dim;
  const std::size_t n = config_.num_pairs();
  const std::size_t hidden = config_.senet_hidden();
  const bool dropout = training && dropout_rng != nullptr && config_.dropout > 0.0;

  ForwardTrace tr;
  tr.live = true;
  tr.training = training;
  tr.batch = batch;
  tr.embedded = DenseMatrix(n_rows, f * k);
  tr.combined = DenseMatrix(n_rows, arch_.combined_width);
  if (arch_.reweighted_path) {
    tr.squeezed = DenseMatrix(n_rows, f);
    tr.senet_pre1 = DenseMatrix(n_rows, hidden);
    tr.senet_pre2 = DenseMatrix(n_rows, f);
    tr.weights = DenseMatrix(n_rows, f);
    tr.reweighted = DenseMatrix(n_rows, f * k);
  }
  if (arch_.interactions && arch_.original_bilinear) tr.left_proj_p = DenseMatrix(n_rows, n * k);
  if (arch_.interactions && arch_.reweighted_path && arch_.reweighted_bilinear) {
    tr.left_proj_q = DenseMatrix(n_rows, n * k);
  }
  if (arch_.deep) {
    for (const auto& w : params.dnn_weights) {
      tr.dnn_pre.emplace_back(n_rows, w.rows());
      tr.dnn_post.emplace_back(n_rows, w.rows());
      if (dropout) tr.dnn_mask.emplace_back(n_rows, w.rows());
    }
  }
  tr.logits.assign(n_rows, 0.0);
  tr.predictions.assign(n_rows, 0.0);

  std::vector<double> hidden_act(hidden);
  const double keep = 1.0 - config_.dropout;
  for (std::size_t r = 0; r < n_rows; ++r) {
    double logit = params.bias(0, 0);
    if (arch_.linear) {
      for (std::size_t i = 0; i < f; ++i) {
        logit += params.linear[i](batch.index(r, i), 0) * batch.value(r, i);
      }
    }

    Span e = tr.embedded.row(r);
    if (arch_.uses_embeddings) {
      for (std::size_t i = 0; i < f; ++i) {
        const double value = batch.value(r, i);
        const auto src = params.embeddings[i].row(batch.index(r, i));
        for (std::size_t t = 0; t < k; ++t) e[i * k + t] = value * src[t];
      }
    }

    Span c = tr.combined.row(r);
    if (arch_.raw_embedding_input) {
      std::copy(e.begin(), e.end(), c.begin());
    } else if (arch_.interactions) {
      interact_row(e, f, k, config_.field_type,
                   arch_.original_bilinear ? &params.bilinear_p : nullptr, c.first(n * k),
                   arch_.original_bilinear ? tr.left_proj_p.row(r) : Span{});
      if (arch_.reweighted_path) {
        Span z = tr.squeezed.row(r);
        for (std::size_t i = 0; i < f; ++i) {
          double s = 0.0;
          for (std::size_t t = 0; t < k; ++t) s += e[i * k + t];
          z[i] = s / static_cast<double>(k);
        }
        Span s1 = tr.senet_pre1.row(r);
        numeric::matvec_into(params.senet_w1, z, s1);
        for (std::size_t h = 0; h < hidden; ++h) hidden_act[h] = std::max(0.0, s1[h]);
        Span s2 = tr.senet_pre2.row(r);
        numeric::matvec_into(params.senet_w2, hidden_act, s2);
        Span a = tr.weights.row(r);
        Span v = tr.reweighted.row(r);
        for (std::size_t i = 0; i < f; ++i) {
          a[i] = std::max(0.0, s2[i]);
          for (std::size_t t = 0; t < k; ++t) v[i * k + t] = a[i] * e[i * k + t];
        }
        interact_row(v, f, k, config_.field_type,
                     arch_.reweighted_bilinear ? &reweighted_matrices(params) : nullptr,
                     c.subspan(n * k, n * k),
                     arch_.reweighted_bilinear ? tr.left_proj_q.row(r) : Span{});
      }
    }

    if (arch_.deep) {
      CSpan input = c;
      for (std::size_t l = 0; l < params.dnn_weights.size(); ++l) {
        Span pre = tr.dnn_pre[l].row(r);
        Span post = tr.dnn_post[l].row(r);
        numeric::matvec_into(params.dnn_weights[l], input, pre);
        const auto b = params.dnn_biases[l].data();
        for (std::size_t u = 0; u < pre.size(); ++u) {
          pre[u] += b[u];
          post[u] = std::max(0.0, pre[u]);
        }
        if (dropout) {
          Span mask = tr.dnn_mask[l].row(r);
          for (std::size_t u = 0; u < post.size(); ++u) {
            mask[u] = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
            post[u] *= mask[u];
          }
        }
        input = post;
      }
      logit += numeric::inner(params.head_weight.row(0), input) + params.head_bias(0, 0);
    } else if (arch_.interactions) {
      for (double x : c) logit += x;
    }

    tr.logits[r] = logit;
    tr.predictions[r] = numeric::sigmoid(logit);
  }
  return tr;
}

std::vector<double> Network::predict(const data::ExampleBatch& batch,
                                     const ModelParams& params) const {
  return forward(batch, params, false, nullptr).predictions;
}

double Network::loss(const data::ExampleBatch& batch, const ModelParams& params) const {
  const auto preds = predict(batch, params);
  return metrics::logloss({preds, batch.labels});
}

GradientTape Network::backward(ForwardTrace& trace, std::span<const std::uint8_t> labels,
                               const ModelParams& params) const {
  if (!trace.live) throw StateError("backward called without a matching forward pass");
  trace.live = false;
  const auto& batch = trace.batch;
  if (labels.size() != batch.size) {
    throw ShapeError("backward: " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(batch.size));
  }

  GradientTape tape(params);
  auto& g = tape.grads();
  const std::size_t n_rows = batch.size;
  if (n_rows == 0) return tape;
  const std::size_t f = config_.num_fields;
  const std::size_t k = config_.embedding_dim;
  const std::size_t n = config_.num_pairs();
  const std::size_t hidden = config_.senet_hidden();
  const double inv_n = 1.0 / static_cast<double>(n_rows);

  std::vector<double> d_comb(arch_.combined_width);
  std::vector<double> d_emb(f * k);
  std::vector<double> d_rew(f * k);
  std::vector<double> scratch(k);
  std::vector<double> hidden_act(hidden), d_s2(f), d_h(hidden), d_z(f);
  std::size_t widest = 0;
  for (const auto& w : params.dnn_weights) widest = std::max(widest, w.rows());
  widest = std::max(widest, arch_.combined_width);
  std::vector<double> d_a(widest), d_prev(widest);

  for (std::size_t r = 0; r < n_rows; ++r) {
    const double dlogit = (trace.predictions[r] - static_cast<double>(labels[r])) * inv_n;
    g.bias(0, 0) += dlogit;
    if (arch_.linear) {
      for (std::size_t i = 0; i < f; ++i) g.linear[i](batch.index(r, i), 0) += dlogit * batch.value(r, i);
    }

    const CSpan c = trace.combined.row(r);
    if (arch_.deep) {
      const std::size_t layers = params.dnn_weights.size();
      const CSpan last = trace.dnn_post[layers - 1].row(r);
      numeric::outer_add(g.head_weight, std::span<const double>(&dlogit, 1), last);
      g.head_bias(0, 0) += dlogit;
      const auto hw = params.head_weight.row(0);
      for (std::size_t u = 0; u < hw.size(); ++u) d_a[u] = dlogit * hw[u];
      for (std::size_t l = layers; l-- > 0;) {
        const auto& w = params.dnn_weights[l];
        const CSpan pre = trace.dnn_pre[l].row(r);
        for (std::size_t u = 0; u < w.rows(); ++u) {
          double d = pre[u] > 0.0 ? d_a[u] : 0.0;
          if (!trace.dnn_mask.empty()) d *= trace.dnn_mask[l](r, u);
          d_a[u] = d;
        }
        const CSpan d_pre(d_a.data(), w.rows());
        const CSpan input = l == 0 ? c : CSpan(trace.dnn_post[l - 1].row(r));
        numeric::outer_add(g.dnn_weights[l], d_pre, input);
        auto gb = g.dnn_biases[l].data();
        for (std::size_t u = 0; u < w.rows(); ++u) gb[u] += d_pre[u];
        std::fill(d_prev.begin(), d_prev.begin() + static_cast<std::ptrdiff_t>(w.cols()), 0.0);
        numeric::matvec_transposed_add(w, d_pre, Span(d_prev.data(), w.cols()));
        std::swap(d_a, d_prev);
      }
      std::copy_n(d_a.begin(), arch_.combined_width, d_comb.begin());
    } else if (arch_.interactions) {
      std::fill(d_comb.begin(), d_comb.end(), dlogit);
    }

    if (!arch_.uses_embeddings) continue;
    std::fill(d_emb.begin(), d_emb.end(), 0.0);
    const CSpan e = trace.embedded.row(r);
    if (arch_.raw_embedding_input) {
      std::copy(d_comb.begin(), d_comb.end(), d_emb.begin());
    } else if (arch_.interactions) {
      interact_row_backward(e, f, k, config_.field_type,
                            arch_.original_bilinear ? &params.bilinear_p : nullptr,
                            arch_.original_bilinear ? &g.bilinear_p : nullptr,
                            arch_.original_bilinear ? trace.left_proj_p.row(r) : CSpan{},
                            CSpan(d_comb).first(n * k), d_emb, scratch);
      if (arch_.reweighted_path) {
        std::fill(d_rew.begin(), d_rew.end(), 0.0);
        const CSpan v = trace.reweighted.row(r);
        interact_row_backward(v, f, k, config_.field_type,
                              arch_.reweighted_bilinear ? &reweighted_matrices(params) : nullptr,
                              arch_.reweighted_bilinear ? &reweighted_matrices(g) : nullptr,
                              arch_.reweighted_bilinear ? trace.left_proj_q.row(r) : CSpan{},
                              CSpan(d_comb).subspan(n * k, n * k), d_rew, scratch);
        const CSpan a = trace.weights.row(r);
        const CSpan s1 = trace.senet_pre1.row(r);
        const CSpan s2 = trace.senet_pre2.row(r);
        for (std::size_t i = 0; i < f; ++i) {
          double da = 0.0;
          for (std::size_t t = 0; t < k; ++t) {
            da += d_rew[i * k + t] * e[i * k + t];
            d_emb[i * k + t] += a[i] * d_rew[i * k + t];
          }
          d_s2[i] = s2[i] > 0.0 ? da : 0.0;
        }
        for (std::size_t h = 0; h < hidden; ++h) hidden_act[h] = std::max(0.0, s1[h]);
        numeric::outer_add(g.senet_w2, d_s2, hidden_act);
        std::fill(d_h.begin(), d_h.end(), 0.0);
        numeric::matvec_transposed_add(params.senet_w2, d_s2, d_h);
        for (std::size_t h = 0; h < hidden; ++h) d_h[h] = s1[h] > 0.0 ? d_h[h] : 0.0;
        numeric::outer_add(g.senet_w1, d_h, trace.squeezed.row(r));
        std::fill(d_z.begin(), d_z.end(), 0.0);
        numeric::matvec_transposed_add(params.senet_w1, d_h, d_z);
        const double inv_k = 1.0 / static_cast<double>(k);
        for (std::size_t i = 0; i < f; ++i) {
          for (std::size_t t = 0; t < k; ++t) d_emb[i * k + t] += d_z[i] * inv_k;
        }
      }
    }

    for (std::size_t i = 0; i < f; ++i) {
      const double value = batch.value(r, i);
      if (value == 0.0) continue;
      auto row = g.embeddings[i].row(batch.index(r, i));
      for (std::size_t t = 0; t < k; ++t) row[t] += value * d_emb[i * k + t];
    }
  }
  return tape;
}

std::vector<std::string> Network::active_blocks(const ModelParams& params) const {
  std::vector<std::string> names;
  const bool shared = params.bilinear_q.empty();
  const bool p_used = arch_.interactions && arch_.original_bilinear;
  const bool q_used = arch_.interactions && arch_.reweighted_path && arch_.reweighted_bilinear;
  params.for_each_block([&](const std::string& name, const DenseMatrix&) {
    bool active = false;
    if (name == "bias") {
      active = true;
    } else if (name.starts_with("embedding.")) {
      active = arch_.uses_embeddings;
    } else if (name.starts_with("linear.")) {
      active = arch_.linear;
    } else if (name.starts_with("senet.")) {
      active = arch_.interactions && arch_.reweighted_path;
    } else if (name.starts_with("bilinear_p.")) {
      active = p_used || (shared && q_used);
    } else if (name.starts_with("bilinear_q.")) {
      active = q_used;
    } else if (name.starts_with("dnn.") || name.starts_with("head.")) {
      active = arch_.deep;
    }
    if (active) names.push_back(name);
  });
  return names;
}

}  // namespace fibinet::model

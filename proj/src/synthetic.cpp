#include <cmath>
#include <string>

#include "fibinet/data.hpp"
#include "fibinet/errors.hpp"
#include "fibinet/metrics.hpp"

namespace fibinet::data {

void SyntheticSpec::validate() const {
  if (num_fields < 2) throw ConfigError("synth.fields", "at least two fields are required");
  if (latent_dim < 1) throw ConfigError("synth.latent_dim", "must be at least 1");
  if (cardinality < 1) throw ConfigError("synth.cardinality", "must be at least 1");
  if (!(noise_rate >= 0.0 && noise_rate < 0.5)) {
    throw ConfigError("synth.noise_rate", "must lie in [0, 0.5)");
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    const std::string key = "synth.pairs[" + std::to_string(p) + "]";
    if (pair.left >= num_fields || pair.right >= num_fields) {
      throw ConfigError(key, "field index out of range");
    }
    if (pair.left == pair.right) throw ConfigError(key, "pair must join two distinct fields");
  }
}

FieldSchema SyntheticSpec::schema() const { return FieldSchema::uniform(num_fields, cardinality); }

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  numeric::Rng rng(spec.seed);
  const std::size_t f = spec.num_fields;
  const std::size_t k = spec.latent_dim;
  const std::size_t card = spec.cardinality;

  // latent[field] is cardinality × k, centered across the field's values.
  std::vector<numeric::DenseMatrix> latent;
  latent.reserve(f);
  // Entry std k^(-1/4) gives cross-field inner products unit variance.
  const double stddev = std::pow(static_cast<double>(k), -0.25);
  for (std::size_t i = 0; i < f; ++i) {
    numeric::DenseMatrix m(card, k);
    for (double& x : m.data()) x = rng.normal() * stddev;
    for (std::size_t t = 0; t < k; ++t) {
      double mean = 0.0;
      for (std::size_t v = 0; v < card; ++v) mean += m(v, t);
      mean /= static_cast<double>(card);
      for (std::size_t v = 0; v < card; ++v) m(v, t) -= mean;
    }
    latent.push_back(std::move(m));
  }

  auto draw = [&](std::size_t n, Dataset& rows, std::vector<double>* logits) {
    rows.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      Example ex;
      ex.indices.resize(f);
      ex.values.assign(f, 1.0);
      for (std::size_t i = 0; i < f; ++i) ex.indices[i] = static_cast<std::uint32_t>(rng.below(card));
      double logit = spec.bias;
      for (const auto& pair : spec.pairs) {
        logit += pair.weight * numeric::inner(latent[pair.left].row(ex.indices[pair.left]),
                                              latent[pair.right].row(ex.indices[pair.right]));
      }
      bool label = rng.bernoulli(1.0 / (1.0 + std::exp(-logit)));
      if (spec.noise_rate > 0.0 && rng.bernoulli(spec.noise_rate)) label = !label;
      ex.label = label ? 1 : 0;
      if (logits) logits->push_back(logit);
      rows.push_back(std::move(ex));
    }
  };

  SyntheticData out;
  draw(spec.train_rows, out.train, nullptr);
  std::vector<double> test_logits;
  draw(spec.test_rows, out.test, &test_logits);

  std::vector<std::uint8_t> labels;
  labels.reserve(out.test.size());
  for (const auto& ex : out.test) labels.push_back(ex.label);
  try {
    out.bayes_auc = metrics::auc({test_logits, labels});
  } catch (const MetricUndefined&) {
    out.bayes_auc = 0.5;
  }
  return out;
}

}  // namespace fibinet::data

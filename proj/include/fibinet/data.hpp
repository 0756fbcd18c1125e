#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fibinet/numeric.hpp"

namespace fibinet::data {

enum class FieldKind { kCategorical, kContinuous };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  std::uint32_t bucket_count = 1;

  bool operator==(const FieldSpec&) const = default;
};

/// Ordered field declarations. Construction enforces at least two fields and
/// a positive bucket count for each.
class FieldSchema {
 public:
  explicit FieldSchema(std::vector<FieldSpec> fields);

  /// Criteo layout: 13 continuous fields followed by 26 categorical ones.
  static FieldSchema criteo(std::uint32_t continuous_buckets, std::uint32_t categorical_buckets);
  /// `num_fields` categorical fields sharing one bucket count.
  static FieldSchema uniform(std::size_t num_fields, std::uint32_t bucket_count);

  std::size_t num_fields() const noexcept { return fields_.size(); }
  const FieldSpec& field(std::size_t i) const { return fields_.at(i); }
  const std::vector<FieldSpec>& fields() const noexcept { return fields_; }

  bool operator==(const FieldSchema&) const = default;

 private:
  std::vector<FieldSpec> fields_;
};

/// One labelled impression: exactly one active feature per field.
struct Example {
  std::uint8_t label = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  bool operator==(const Example&) const = default;
};

using Dataset = std::vector<Example>;

/// Columnar mini-batch. `indices` and `values` are size × num_fields, row-major.
struct ExampleBatch {
  std::size_t size = 0;
  std::size_t num_fields = 0;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::uint32_t index(std::size_t row, std::size_t field) const {
    return indices[row * num_fields + field];
  }
  double value(std::size_t row, std::size_t field) const {
    return values[row * num_fields + field];
  }

  static ExampleBatch from_examples(const Dataset& rows);
};

/// FNV-1a (64-bit) over the bytes of "<field_index>:<token>", modulo bucket_count.
std::uint32_t hash_feature(std::size_t field_index, std::string_view token,
                           std::uint32_t bucket_count);

/// Token for a continuous value: "missing", "neg", or floor(ln(x+1)^2).
std::string discretize_continuous(std::optional<double> x);

struct LoadResult {
  Dataset examples;
  std::size_t skipped = 0;
};

/// Parses one TSV stream. Label column first, one column per field, no header.
/// Rows with the wrong column count or an unparseable continuous value are
/// skipped and counted; a label outside {0,1} throws ParseError.
LoadResult parse_tsv(std::istream& in, const FieldSchema& schema, char delimiter = '\t');
LoadResult load_tsv(const std::filesystem::path& path, const FieldSchema& schema,
                    char delimiter = '\t');

/// Number of delimiter-separated columns on the first non-empty line, if any.
std::optional<std::size_t> peek_column_count(const std::filesystem::path& path,
                                             char delimiter = '\t');

struct Split {
  Dataset train;
  Dataset test;
};

/// Independent Bernoulli(test_fraction) assignment per row.
Split split_train_test(const Dataset& rows, double test_fraction, std::uint64_t seed);
/// Order-preserving split: the last round(test_fraction · N) rows form the test set.
Split split_head_tail(const Dataset& rows, double test_fraction);

/// Shuffled mini-batches; the last one may be short. A seed of std::nullopt
/// keeps file order.
std::vector<ExampleBatch> batches(const Dataset& rows, std::size_t batch_size,
                                  std::optional<std::uint64_t> shuffle_seed);

struct PlantedPair {
  std::size_t left = 0;
  std::size_t right = 0;
  double weight = 1.0;
};

/// Second-order synthetic click log. Each field draws `cardinality` latent
/// vectors of dimension `latent_dim`, centered per field so that no single
/// field carries marginal signal.
struct SyntheticSpec {
  std::size_t num_fields = 10;
  std::size_t latent_dim = 4;
  std::uint32_t cardinality = 20;
  std::size_t train_rows = 50000;
  std::size_t test_rows = 10000;
  double bias = 0.0;
  std::vector<PlantedPair> pairs;
  double noise_rate = 0.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError on an invalid spec.
  void validate() const;
  FieldSchema schema() const;
};

struct SyntheticData {
  Dataset train;
  Dataset test;
  /// AUC of the generating logit on the test labels.
  double bayes_auc = 0.5;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Writes rows in the loader's TSV dialect, using each row's bucket index as
/// its token.
void write_tsv(std::ostream& out, const Dataset& rows, char delimiter = '\t');

}  // namespace fibinet::data

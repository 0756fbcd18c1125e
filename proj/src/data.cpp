#include "fibinet/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "fibinet/errors.hpp"

namespace fibinet::data {

FieldSchema::FieldSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  if (fields_.size() < 2) {
    throw ConfigError("schema.fields", "at least two fields are required, got " +
                                           std::to_string(fields_.size()));
  }
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].bucket_count < 1) {
      throw ConfigError("schema.fields[" + std::to_string(i) + "].buckets",
                        "bucket count must be at least 1");
    }
  }
}

FieldSchema FieldSchema::criteo(std::uint32_t continuous_buckets,
                                std::uint32_t categorical_buckets) {
  std::vector<FieldSpec> fields;
  for (int i = 1; i <= 13; ++i) {
    fields.push_back({"I" + std::to_string(i), FieldKind::kContinuous, continuous_buckets});
  }
  for (int i = 1; i <= 26; ++i) {
    fields.push_back({"C" + std::to_string(i), FieldKind::kCategorical, categorical_buckets});
  }
  return FieldSchema(std::move(fields));
}

FieldSchema FieldSchema::uniform(std::size_t num_fields, std::uint32_t bucket_count) {
  std::vector<FieldSpec> fields;
  for (std::size_t i = 0; i < num_fields; ++i) {
    fields.push_back({"f" + std::to_string(i), FieldKind::kCategorical, bucket_count});
  }
  return FieldSchema(std::move(fields));
}

ExampleBatch ExampleBatch::from_examples(const Dataset& rows) {
  ExampleBatch batch;
  batch.size = rows.size();
  batch.num_fields = rows.empty() ? 0 : rows.front().indices.size();
  batch.labels.reserve(batch.size);
  batch.indices.reserve(batch.size * batch.num_fields);
  batch.values.reserve(batch.size * batch.num_fields);
  for (const auto& ex : rows) {
    if (ex.indices.size() != batch.num_fields || ex.values.size() != batch.num_fields) {
      throw ShapeError("batch rows disagree on field count");
    }
    batch.labels.push_back(ex.label);
    batch.indices.insert(batch.indices.end(), ex.indices.begin(), ex.indices.end());
    batch.values.insert(batch.values.end(), ex.values.begin(), ex.values.end());
  }
  return batch;
}

std::uint32_t hash_feature(std::size_t field_index, std::string_view token,
                           std::uint32_t bucket_count) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  mix(std::to_string(field_index));
  mix(":");
  mix(token);
  return static_cast<std::uint32_t>(h % bucket_count);
}

std::string discretize_continuous(std::optional<double> x) {
  if (!x) return "missing";
  if (*x < 0.0) return "neg";
  const double l = std::log(*x + 1.0);
  return std::to_string(static_cast<long long>(std::floor(l * l)));
}

namespace {

std::vector<std::string_view> split_line(std::string_view line, char delimiter) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cols;
}

std::optional<double> parse_number(std::string_view s, bool& ok) {
  ok = true;
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
    ok = false;
    return std::nullopt;
  }
  return value;
}

}  // namespace

LoadResult parse_tsv(std::istream& in, const FieldSchema& schema, char delimiter) {
  LoadResult result;
  const std::size_t f = schema.num_fields();
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split_line(line, delimiter);
    if (cols.size() != f + 1) {
      ++result.skipped;
      continue;
    }
    Example ex;
    if (cols[0] == "0") {
      ex.label = 0;
    } else if (cols[0] == "1") {
      ex.label = 1;
    } else {
      throw ParseError("line " + std::to_string(line_number) + ": label '" +
                       std::string(cols[0]) + "' is not 0 or 1");
    }
    ex.indices.resize(f);
    ex.values.assign(f, 1.0);
    bool well_formed = true;
    for (std::size_t i = 0; i < f && well_formed; ++i) {
      const auto& spec = schema.field(i);
      const std::string_view raw = cols[i + 1];
      if (spec.kind == FieldKind::kContinuous) {
        bool ok = true;
        const auto x = parse_number(raw, ok);
        if (!ok) {
          well_formed = false;
          break;
        }
        ex.indices[i] = hash_feature(i, discretize_continuous(x), spec.bucket_count);
      } else {
        ex.indices[i] = hash_feature(i, raw, spec.bucket_count);
      }
    }
    if (!well_formed) {
      ++result.skipped;
      continue;
    }
    result.examples.push_back(std::move(ex));
  }
  return result;
}

LoadResult load_tsv(const std::filesystem::path& path, const FieldSchema& schema,
                    char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  auto result = parse_tsv(in, schema, delimiter);
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return result;
}

std::optional<std::size_t> peek_column_count(const std::filesystem::path& path,
                                             char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return split_line(line, delimiter).size();
  }
  return std::nullopt;
}

Split split_train_test(const Dataset& rows, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction", "must lie strictly between 0 and 1");
  }
  numeric::Rng rng(seed);
  Split split;
  for (const auto& ex : rows) {
    (rng.bernoulli(test_fraction) ? split.test : split.train).push_back(ex);
  }
  return split;
}

Split split_head_tail(const Dataset& rows, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction", "must lie strictly between 0 and 1");
  }
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(rows.size())));
  const std::size_t cut = rows.size() - n_test;
  Split split;
  split.train.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(cut));
  split.test.assign(rows.begin() + static_cast<std::ptrdiff_t>(cut), rows.end());
  return split;
}

std::vector<ExampleBatch> batches(const Dataset& rows, std::size_t batch_size,
                                  std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle_seed) {
    numeric::Rng rng(*shuffle_seed);
    rng.shuffle(order);
  }
  std::vector<ExampleBatch> out;
  out.reserve((rows.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    ExampleBatch batch;
    batch.size = end - start;
    batch.num_fields = rows[order[start]].indices.size();
    batch.labels.reserve(batch.size);
    batch.indices.reserve(batch.size * batch.num_fields);
    batch.values.reserve(batch.size * batch.num_fields);
    for (std::size_t r = start; r < end; ++r) {
      const auto& ex = rows[order[r]];
      batch.labels.push_back(ex.label);
      batch.indices.insert(batch.indices.end(), ex.indices.begin(), ex.indices.end());
      batch.values.insert(batch.values.end(), ex.values.begin(), ex.values.end());
    }
    out.push_back(std::move(batch));
  }
  return out;
}

void write_tsv(std::ostream& out, const Dataset& rows, char delimiter) {
  for (const auto& ex : rows) {
    out << static_cast<int>(ex.label);
    for (auto idx : ex.indices) out << delimiter << idx;
    out << '\n';
  }
}

}  // namespace fibinet::data

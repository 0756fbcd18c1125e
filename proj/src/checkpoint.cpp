#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "fibinet/errors.hpp"
#include "fibinet/model.hpp"

namespace fibinet::model {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "FIBN1";

static_assert(std::numeric_limits<double>::is_iec559, "checkpoints assume IEEE-754 doubles");

class Writer {
 public:
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

json to_json(const data::FieldSchema& schema, const ModelConfig& config) {
  json fields = json::array();
  for (const auto& field : schema.fields()) {
    fields.push_back({{"name", field.name},
                      {"kind", field.kind == data::FieldKind::kContinuous ? "continuous" : "categorical"},
                      {"buckets", field.bucket_count}});
  }
  return {
      {"schema", {{"fields", fields}}},
      {"model",
       {{"fields", config.num_fields},
        {"k", config.embedding_dim},
        {"reduction_ratio", config.reduction_ratio},
        {"field_type", to_string(config.field_type)},
        {"combination", config.combination.to_string()},
        {"mode", to_string(config.mode)},
        {"hidden_units", config.hidden_units},
        {"dropout", config.dropout},
        {"ablation", to_string(config.ablation)},
        {"share_bilinear", config.share_bilinear},
        {"use_linear", config.use_linear}}},
  };
}

std::pair<data::FieldSchema, ModelConfig> from_json(const json& j) {
  std::vector<data::FieldSpec> fields;
  for (const auto& f : j.at("schema").at("fields")) {
    const auto kind = f.at("kind").get<std::string>();
    fields.push_back({f.at("name").get<std::string>(),
                      kind == "continuous" ? data::FieldKind::kContinuous : data::FieldKind::kCategorical,
                      f.at("buckets").get<std::uint32_t>()});
  }
  const auto& m = j.at("model");
  ModelConfig c;
  c.num_fields = m.at("fields").get<std::size_t>();
  c.embedding_dim = m.at("k").get<std::size_t>();
  c.reduction_ratio = m.at("reduction_ratio").get<std::size_t>();
  c.field_type = parse_field_type(m.at("field_type").get<std::string>());
  c.combination = CombinationCode::parse(m.at("combination").get<std::string>());
  c.mode = parse_mode(m.at("mode").get<std::string>());
  c.hidden_units = m.at("hidden_units").get<std::vector<std::size_t>>();
  c.dropout = m.at("dropout").get<double>();
  c.ablation = parse_ablation(m.at("ablation").get<std::string>());
  c.share_bilinear = m.at("share_bilinear").get<bool>();
  c.use_linear = m.at("use_linear").get<bool>();
  return {data::FieldSchema(std::move(fields)), c};
}

}  // namespace

std::string config_to_json(const data::FieldSchema& schema, const ModelConfig& config) {
  return to_json(schema, config).dump();
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.bytes(kMagic);
  const std::string header = config_to_json(checkpoint.schema, checkpoint.config);
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.bytes(header);
  std::uint32_t count = 0;
  checkpoint.params.for_each_block([&](const std::string&, const DenseMatrix&) { ++count; });
  w.u32(count);
  checkpoint.params.for_each_block([&](const std::string& name, const DenseMatrix& m) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(2);
    w.u64(m.rows());
    w.u64(m.cols());
    for (double x : m.data()) w.f64(x);
  });
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  const std::uint32_t header_len = r.u32();
  const auto header = r.bytes(header_len);
  json j;
  try {
    j = json::parse(header);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  auto [schema, config] = [&] {
    try {
      return from_json(j);
    } catch (const json::exception& e) {
      throw FormatError(std::string("checkpoint header: ") + e.what());
    }
  }();

  // Shapes follow from the config; a throwaway generator only sizes the arrays.
  numeric::Rng sizing(0);
  ModelParams params = ModelParams::initialize(config, schema, sizing);
  std::uint32_t expected = 0;
  params.for_each_block([&](const std::string&, const DenseMatrix&) { ++expected; });
  const std::uint32_t count = r.u32();
  if (count != expected) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " arrays, config implies " +
                      std::to_string(expected));
  }
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::string name(r.bytes(r.u32()));
    const std::uint32_t rank = r.u32();
    if (rank != 2) throw FormatError("array '" + name + "' has rank " + std::to_string(rank));
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    DenseMatrix* target = params.find_block(name);
    if (!target || target->rows() != rows || target->cols() != cols) {
      throw FormatError("array '" + name + "' does not match the configured model");
    }
    for (double& x : target->data()) x = r.f64();
  }
  if (!r.done()) throw FormatError("trailing bytes after the last array");
  return {std::move(schema), std::move(config), std::move(params)};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace fibinet::model

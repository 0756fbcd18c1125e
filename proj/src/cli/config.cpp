#include <fstream>

#include "fibinet/cli.hpp"
#include "fibinet/errors.hpp"

namespace fibinet::cli {

using nlohmann::json;

json default_config_json() {
  return json::parse(R"({
    "seed": 42,
    "schema": {"uniform": {"fields": 10, "buckets": 1000}},
    "model": {
      "k": 10,
      "reduction_ratio": 3,
      "field_type": "interaction",
      "combination": "11",
      "mode": "deep",
      "hidden_units": [400, 400, 400],
      "dropout": 0.5,
      "ablation": "none",
      "share_bilinear": false,
      "use_linear": true
    },
    "train": {
      "epochs": 10,
      "batch_size": 1000,
      "learning_rate": 0.0001,
      "beta1": 0.9,
      "beta2": 0.999,
      "epsilon": 1e-8,
      "eval_every": 1,
      "patience": 2,
      "record_time": false
    },
    "data": {
      "train": null,
      "valid": null,
      "test": null,
      "delimiter": "\t",
      "valid_fraction": 0.1,
      "test_fraction": 0.2,
      "split": "random",
      "synthetic": false
    },
    "output": {
      "checkpoint": "fibinet.ckpt",
      "log": "metrics.csv",
      "ablation": "ablation.csv"
    },
    "synth": {
      "fields": 10,
      "latent_dim": 4,
      "cardinality": 20,
      "train_rows": 50000,
      "test_rows": 10000,
      "bias": 0.0,
      "pairs": [[0, 1, 2.0], [2, 3, 2.0], [4, 5, 2.0], [6, 7, 2.0], [8, 9, 2.0]],
      "noise_rate": 0.0
    },
    "gradcheck": {
      "fields": 4,
      "k": 3,
      "hidden_units": [5, 4],
      "step": 1e-5,
      "tolerance": 1e-4,
      "rows": 6,
      "buckets": 3
    }
  })");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set", "expected <dotted.key>=<value>, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    pointer += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  doc[json::json_pointer(pointer)] = value;
}

namespace {

template <typename T>
T get(const json& section, const std::string& prefix, const char* key) {
  const std::string name = prefix + "." + key;
  if (!section.contains(key)) throw ConfigError(name, "missing");
  try {
    return section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(name, std::string("wrong type (") + e.what() + ")");
  }
}

std::size_t get_count(const json& section, const std::string& prefix, const char* key) {
  const std::string name = prefix + "." + key;
  const auto& v = section.contains(key) ? section.at(key) : json();
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(name, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::optional<std::filesystem::path> get_path(const json& section, const std::string& prefix,
                                              const char* key) {
  if (!section.contains(key) || section.at(key).is_null()) return std::nullopt;
  if (!section.at(key).is_string()) throw ConfigError(prefix + "." + key, "expected a path string");
  return std::filesystem::path(section.at(key).get<std::string>());
}

std::uint32_t get_buckets(const json& section, const std::string& prefix, const char* key) {
  const auto n = get_count(section, prefix, key);
  if (n < 1 || n > UINT32_MAX) throw ConfigError(prefix + "." + key, "bucket count must be in [1, 2^32)");
  return static_cast<std::uint32_t>(n);
}

std::vector<std::size_t> get_units(const json& section, const std::string& prefix, const char* key) {
  const std::string name = prefix + "." + key;
  if (!section.contains(key) || !section.at(key).is_array()) throw ConfigError(name, "expected an array");
  std::vector<std::size_t> units;
  for (const auto& u : section.at(key)) {
    if (!u.is_number_integer() || u.get<long long>() < 1) {
      throw ConfigError(name, "layer widths must be positive integers");
    }
    units.push_back(u.get<std::size_t>());
  }
  return units;
}

data::FieldSchema resolve_schema(const json& s) {
  if (s.contains("fields")) {
    std::vector<data::FieldSpec> fields;
    std::size_t i = 0;
    for (const auto& f : s.at("fields")) {
      const std::string prefix = "schema.fields[" + std::to_string(i++) + "]";
      data::FieldSpec spec;
      spec.name = f.contains("name") ? get<std::string>(f, prefix, "name") : "f" + std::to_string(i - 1);
      const std::string kind = f.contains("kind") ? get<std::string>(f, prefix, "kind") : "categorical";
      if (kind == "categorical") {
        spec.kind = data::FieldKind::kCategorical;
      } else if (kind == "continuous") {
        spec.kind = data::FieldKind::kContinuous;
      } else {
        throw ConfigError(prefix + ".kind", "expected categorical|continuous, got '" + kind + "'");
      }
      spec.bucket_count = get_buckets(f, prefix, "buckets");
      fields.push_back(spec);
    }
    return data::FieldSchema(std::move(fields));
  }
  if (s.contains("criteo")) {
    const auto& c = s.at("criteo");
    return data::FieldSchema::criteo(get_buckets(c, "schema.criteo", "continuous_buckets"),
                                     get_buckets(c, "schema.criteo", "categorical_buckets"));
  }
  if (s.contains("uniform")) {
    const auto& u = s.at("uniform");
    return data::FieldSchema::uniform(get_count(u, "schema.uniform", "fields"),
                                      get_buckets(u, "schema.uniform", "buckets"));
  }
  throw ConfigError("schema", "expected one of 'fields', 'criteo' or 'uniform'");
}

}  // namespace

RunConfig resolve_config(const json& doc) {
  RunConfig rc;
  const json* seed = doc.contains("seed") ? &doc.at("seed") : nullptr;
  if (!seed || !(seed->is_number_unsigned() ||
                 (seed->is_number_integer() && seed->get<long long>() >= 0))) {
    throw ConfigError("seed", "expected a non-negative integer");
  }
  rc.seed = doc.at("seed").get<std::uint64_t>();

  const bool synthetic = doc.at("data").value("synthetic", false);

  const auto& s = doc.at("synth");
  rc.synth.num_fields = get_count(s, "synth", "fields");
  rc.synth.latent_dim = get_count(s, "synth", "latent_dim");
  rc.synth.cardinality = get_buckets(s, "synth", "cardinality");
  rc.synth.train_rows = get_count(s, "synth", "train_rows");
  rc.synth.test_rows = get_count(s, "synth", "test_rows");
  rc.synth.bias = get<double>(s, "synth", "bias");
  rc.synth.noise_rate = get<double>(s, "synth", "noise_rate");
  rc.synth.pairs.clear();
  if (!s.contains("pairs") || !s.at("pairs").is_array()) throw ConfigError("synth.pairs", "expected an array");
  for (std::size_t p = 0; p < s.at("pairs").size(); ++p) {
    const auto& e = s.at("pairs")[p];
    const std::string name = "synth.pairs[" + std::to_string(p) + "]";
    if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
        !e[2].is_number() || e[0].get<long long>() < 0 || e[1].get<long long>() < 0) {
      throw ConfigError(name, "expected [left_field, right_field, weight]");
    }
    rc.synth.pairs.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<double>()});
  }
  rc.synth.seed = numeric::derive_seed(rc.seed, "synth");
  rc.synth.validate();

  // A synthetic run reads its schema from the generator.
  rc.schema = synthetic ? rc.synth.schema() : resolve_schema(doc.at("schema"));

  const auto& m = doc.at("model");
  rc.model.num_fields = rc.schema.num_fields();
  rc.model.embedding_dim = get_count(m, "model", "k");
  rc.model.reduction_ratio = get_count(m, "model", "reduction_ratio");
  rc.model.field_type = model::parse_field_type(get<std::string>(m, "model", "field_type"));
  rc.model.combination = model::CombinationCode::parse(get<std::string>(m, "model", "combination"));
  rc.model.mode = model::parse_mode(get<std::string>(m, "model", "mode"));
  rc.model.hidden_units = get_units(m, "model", "hidden_units");
  rc.model.dropout = get<double>(m, "model", "dropout");
  rc.model.ablation = model::parse_ablation(get<std::string>(m, "model", "ablation"));
  rc.model.share_bilinear = get<bool>(m, "model", "share_bilinear");
  rc.model.use_linear = get<bool>(m, "model", "use_linear");
  rc.model.validate();

  const auto& t = doc.at("train");
  rc.train.epochs = get_count(t, "train", "epochs");
  rc.train.batch_size = get_count(t, "train", "batch_size");
  rc.train.adam.learning_rate = get<double>(t, "train", "learning_rate");
  rc.train.adam.beta1 = get<double>(t, "train", "beta1");
  rc.train.adam.beta2 = get<double>(t, "train", "beta2");
  rc.train.adam.epsilon = get<double>(t, "train", "epsilon");
  rc.train.eval_every = get_count(t, "train", "eval_every");
  rc.train.patience = get_count(t, "train", "patience");
  rc.train.record_time = get<bool>(t, "train", "record_time");
  rc.train.seed = numeric::derive_seed(rc.seed, "train");
  rc.train.validate();

  const auto& d = doc.at("data");
  rc.data.train = get_path(d, "data", "train");
  rc.data.valid = get_path(d, "data", "valid");
  rc.data.test = get_path(d, "data", "test");
  const auto delim = get<std::string>(d, "data", "delimiter");
  if (delim.size() != 1) throw ConfigError("data.delimiter", "expected a single character");
  rc.data.delimiter = delim[0];
  rc.data.valid_fraction = get<double>(d, "data", "valid_fraction");
  rc.data.test_fraction = get<double>(d, "data", "test_fraction");
  for (auto [name, v] : {std::pair{"data.valid_fraction", rc.data.valid_fraction},
                         std::pair{"data.test_fraction", rc.data.test_fraction}}) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(name, "must lie strictly between 0 and 1");
  }
  rc.data.split = get<std::string>(d, "data", "split");
  if (rc.data.split != "random" && rc.data.split != "tail") {
    throw ConfigError("data.split", "expected random|tail, got '" + rc.data.split + "'");
  }
  rc.data.synthetic = synthetic;

  const auto& o = doc.at("output");
  rc.output.checkpoint = get<std::string>(o, "output", "checkpoint");
  rc.output.log = get<std::string>(o, "output", "log");
  rc.output.ablation = get<std::string>(o, "output", "ablation");

  const auto& g = doc.at("gradcheck");
  rc.gradcheck.fields = get_count(g, "gradcheck", "fields");
  rc.gradcheck.k = get_count(g, "gradcheck", "k");
  rc.gradcheck.hidden_units = get_units(g, "gradcheck", "hidden_units");
  rc.gradcheck.options.step = get<double>(g, "gradcheck", "step");
  rc.gradcheck.options.tolerance = get<double>(g, "gradcheck", "tolerance");
  rc.gradcheck.options.rows = get_count(g, "gradcheck", "rows");
  rc.gradcheck.options.buckets = get_buckets(g, "gradcheck", "buckets");
  return rc;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides,
                          std::optional<std::uint64_t> seed) {
  json doc = default_config_json();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("--config", "cannot open '" + path->string() + "'");
    json user;
    try {
      user = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
    // An explicit schema replaces the default one instead of merging with it.
    if (user.contains("schema")) doc.erase("schema");
    doc.merge_patch(user);
  }
  for (const auto& o : overrides) {
    // Switching schema style (e.g. uniform -> criteo) drops the old one.
    if (o.starts_with("schema.")) {
      const auto key = o.substr(7, o.find_first_of(".=", 7) - 7);
      if (doc.contains("schema") && !doc["schema"].contains(key)) doc["schema"] = json::object();
    }
    apply_override(doc, o);
  }
  if (seed) doc["seed"] = *seed;
  try {
    return resolve_config(doc);
  } catch (const json::exception& e) {
    throw ConfigError("config", e.what());
  }
}

}  // namespace fibinet::cli

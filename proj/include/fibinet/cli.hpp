#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fibinet/data.hpp"
#include "fibinet/model.hpp"
#include "fibinet/train.hpp"

namespace fibinet::cli {

/// Stable process exit codes.
enum ExitCode : int {
  kSuccess = 0,
  kRuntimeFailure = 1,
  kUsageError = 2,
};

struct DataPaths {
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> valid;
  std::optional<std::filesystem::path> test;
  char delimiter = '\t';
  double valid_fraction = 0.1;
  double test_fraction = 0.2;
  /// "random" (Bernoulli per row) or "tail" (order-preserving).
  std::string split = "random";
  /// Use the synth section instead of files.
  bool synthetic = false;
};

struct OutputPaths {
  std::filesystem::path checkpoint = "fibinet.ckpt";
  std::filesystem::path log = "metrics.csv";
  std::filesystem::path ablation = "ablation.csv";
};

struct GradCheckSettings {
  std::size_t fields = 4;
  std::size_t k = 3;
  std::vector<std::size_t> hidden_units{5, 4};
  train::GradCheckOptions options{};
};

/// Everything one command needs, resolved from the JSON file plus overrides.
struct RunConfig {
  std::uint64_t seed = 42;
  data::FieldSchema schema = data::FieldSchema::uniform(2, 1);
  model::ModelConfig model{};
  train::TrainConfig train{};
  DataPaths data{};
  OutputPaths output{};
  data::SyntheticSpec synth{};
  GradCheckSettings gradcheck{};
};

/// Defaults for every key, as JSON.
nlohmann::json default_config_json();

/// Applies `--set dotted.key=value` to a config document. The value is read
/// as JSON when it parses, otherwise as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Resolves a merged document. Throws ConfigError naming the bad key.
RunConfig resolve_config(const nlohmann::json& doc);

/// Loads the file (if any), merges it over the defaults, applies overrides
/// and the seed flag, and resolves.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides,
                          std::optional<std::uint64_t> seed);

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fibinet::cli

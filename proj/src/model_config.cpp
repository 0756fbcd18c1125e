#include <algorithm>
#include <cmath>

#include "fibinet/errors.hpp"
#include "fibinet/model.hpp"

namespace fibinet::model {

CombinationCode CombinationCode::parse(std::string_view code) {
  auto digit = [&](char c) {
    if (c == '0') return false;
    if (c == '1') return true;
    throw ConfigError("model.combination", "expected two digits from {0,1}, got '" +
                                               std::string(code) + "'");
  };
  if (code.size() != 2) {
    throw ConfigError("model.combination",
                      "expected two digits from {0,1}, got '" + std::string(code) + "'");
  }
  return {digit(code[0]), digit(code[1])};
}

std::string CombinationCode::to_string() const {
  return std::string{original_bilinear ? '1' : '0', reweighted_bilinear ? '1' : '0'};
}

std::string_view to_string(FieldType t) {
  switch (t) {
    case FieldType::kAll: return "all";
    case FieldType::kEach: return "each";
    case FieldType::kInteraction: return "interaction";
  }
  return "?";
}

std::string_view to_string(Mode m) { return m == Mode::kDeep ? "deep" : "shallow"; }

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoSe: return "no_se";
    case Ablation::kNoBi: return "no_bi";
    case Ablation::kFm: return "fm";
    case Ablation::kFnn: return "fnn";
    case Ablation::kLr: return "lr";
  }
  return "?";
}

FieldType parse_field_type(std::string_view s) {
  if (s == "all") return FieldType::kAll;
  if (s == "each") return FieldType::kEach;
  if (s == "interaction") return FieldType::kInteraction;
  throw ConfigError("model.field_type",
                    "expected one of all|each|interaction, got '" + std::string(s) + "'");
}

Mode parse_mode(std::string_view s) {
  if (s == "deep") return Mode::kDeep;
  if (s == "shallow") return Mode::kShallow;
  throw ConfigError("model.mode", "expected deep|shallow, got '" + std::string(s) + "'");
}

Ablation parse_ablation(std::string_view s) {
  for (auto a : {Ablation::kNone, Ablation::kNoSe, Ablation::kNoBi, Ablation::kFm,
                 Ablation::kFnn, Ablation::kLr}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("model.ablation",
                    "expected one of none|no_se|no_bi|fm|fnn|lr, got '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (num_fields < 2) throw ConfigError("model.fields", "at least two fields are required");
  if (embedding_dim < 1) throw ConfigError("model.k", "embedding dimension must be at least 1");
  if (reduction_ratio < 1) throw ConfigError("model.reduction_ratio", "must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout", "must lie in [0, 1)");
  if (Architecture::resolve(*this).deep) {
    if (hidden_units.empty()) {
      throw ConfigError("model.hidden_units", "a deep model needs at least one hidden layer");
    }
    for (std::size_t l = 0; l < hidden_units.size(); ++l) {
      if (hidden_units[l] < 1) {
        throw ConfigError("model.hidden_units[" + std::to_string(l) + "]",
                          "layer width must be at least 1");
      }
    }
  }
}

std::size_t ModelConfig::senet_hidden() const noexcept {
  const std::size_t r = reduction_ratio == 0 ? 1 : reduction_ratio;
  return std::max<std::size_t>(1, (num_fields + r - 1) / r);
}

std::size_t ModelConfig::bilinear_matrices_per_path() const noexcept {
  switch (field_type) {
    case FieldType::kAll: return 1;
    case FieldType::kEach: return num_fields;
    case FieldType::kInteraction: return num_pairs();
  }
  return 0;
}

Architecture Architecture::resolve(const ModelConfig& config) {
  Architecture arch;
  arch.linear = config.use_linear;
  arch.original_bilinear = config.combination.original_bilinear;
  arch.reweighted_bilinear = config.combination.reweighted_bilinear;
  arch.deep = config.mode == Mode::kDeep;
  switch (config.ablation) {
    case Ablation::kNone:
      break;
    case Ablation::kNoSe:
      arch.reweighted_path = false;
      arch.reweighted_bilinear = false;
      break;
    case Ablation::kNoBi:
      arch.original_bilinear = false;
      arch.reweighted_bilinear = false;
      break;
    case Ablation::kFm:
      arch.reweighted_path = false;
      arch.original_bilinear = false;
      arch.reweighted_bilinear = false;
      arch.deep = false;
      break;
    case Ablation::kFnn:
      arch.interactions = false;
      arch.reweighted_path = false;
      arch.original_bilinear = false;
      arch.reweighted_bilinear = false;
      arch.deep = true;
      arch.raw_embedding_input = true;
      break;
    case Ablation::kLr:
      arch.linear = true;
      arch.interactions = false;
      arch.reweighted_path = false;
      arch.original_bilinear = false;
      arch.reweighted_bilinear = false;
      arch.deep = false;
      arch.uses_embeddings = false;
      break;
  }
  const std::size_t k = config.embedding_dim;
  if (arch.raw_embedding_input) {
    arch.combined_width = config.num_fields * k;
  } else if (arch.interactions) {
    arch.combined_width = (arch.reweighted_path ? 2 : 1) * config.num_pairs() * k;
  }
  return arch;
}

}  // namespace fibinet::model

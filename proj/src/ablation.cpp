#include <cstdio>
#include <ostream>

#include "fibinet/train.hpp"

namespace fibinet::train {

std::vector<std::pair<std::string, model::ModelConfig>> ablation_variants(
    const model::ModelConfig& base) {
  using model::Ablation;
  auto with = [&](Ablation a) {
    auto c = base;
    c.ablation = a;
    return c;
  };
  return {{"BASE", with(Ablation::kNone)},
          {"NO-SE", with(Ablation::kNoSe)},
          {"NO-BI", with(Ablation::kNoBi)},
          {"FM", with(Ablation::kFm)},
          {"FNN", with(Ablation::kFnn)}};
}

std::vector<AblationRow> run_ablation(const model::ModelConfig& base,
                                      const data::FieldSchema& schema,
                                      const data::Dataset& train_set,
                                      const data::Dataset& valid_set,
                                      const data::Dataset& test_set, const TrainConfig& config) {
  std::vector<AblationRow> rows;
  for (const auto& [name, cfg] : ablation_variants(base)) {
    const model::Network net(cfg, schema);
    const auto result = train(net, train_set, valid_set, config);
    const auto ev = evaluate(net, result.best, test_set);
    rows.push_back({name, ev.auc, ev.logloss});
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,auc,logloss\n";
  char buf[96];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.12f,%.12f", row.auc, row.logloss);
    out << row.variant << ',' << buf << '\n';
  }
}

}  // namespace fibinet::train

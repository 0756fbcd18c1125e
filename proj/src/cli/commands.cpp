#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fibinet/cli.hpp"
#include "fibinet/errors.hpp"

namespace fibinet::cli {

namespace {

using nlohmann::json;

struct CommonFlags {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

std::string fixed(double x, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, x);
  return buf;
}

void require_readable(const std::optional<std::filesystem::path>& path, const std::string& field) {
  if (!path) throw ConfigError(field, "required but not set");
  if (!std::filesystem::is_regular_file(*path)) {
    throw ConfigError(field, "file '" + path->string() + "' does not exist");
  }
}

data::Dataset load_checked(const std::filesystem::path& path, const RunConfig& rc,
                           const std::string& field, std::ostream& out) {
  const auto cols = data::peek_column_count(path, rc.data.delimiter);
  const std::size_t f = rc.schema.num_fields();
  if (cols && *cols != f + 1) {
    throw ConfigError(field, "schema declares " + std::to_string(f) + " fields but '" +
                                 path.string() + "' has " + std::to_string(*cols - 1) +
                                 " feature columns");
  }
  auto loaded = data::load_tsv(path, rc.schema, rc.data.delimiter);
  out << "loaded " << loaded.examples.size() << " rows from " << path.string() << " (skipped "
      << loaded.skipped << ")\n";
  return std::move(loaded.examples);
}

data::Split split_rows(const data::Dataset& rows, double fraction, const RunConfig& rc,
                       std::string_view consumer) {
  if (rc.data.split == "tail") return data::split_head_tail(rows, fraction);
  return data::split_train_test(rows, fraction, numeric::derive_seed(rc.seed, consumer));
}

struct Sets {
  data::Dataset train;
  data::Dataset valid;
  data::Dataset test;
};

/// Train/valid/test sets for a run. Missing valid/test sets are split off
/// the training rows; `need_test` controls whether a test set is carved out.
Sets prepare_sets(const RunConfig& rc, bool need_test, std::ostream& out) {
  Sets sets;
  if (rc.data.synthetic) {
    auto synth = data::generate_synthetic(rc.synth);
    out << "synthetic data: " << synth.train.size() << " train / " << synth.test.size()
        << " test rows, bayes_auc=" << fixed(synth.bayes_auc) << "\n";
    sets.test = std::move(synth.test);
    auto s = split_rows(synth.train, rc.data.valid_fraction, rc, "split.valid");
    sets.train = std::move(s.train);
    sets.valid = std::move(s.test);
    return sets;
  }
  require_readable(rc.data.train, "data.train");
  if (rc.data.valid) require_readable(rc.data.valid, "data.valid");
  if (rc.data.test) require_readable(rc.data.test, "data.test");

  sets.train = load_checked(*rc.data.train, rc, "data.train", out);
  if (rc.data.test) {
    sets.test = load_checked(*rc.data.test, rc, "data.test", out);
  } else if (need_test) {
    auto s = split_rows(sets.train, rc.data.test_fraction, rc, "split.test");
    sets.train = std::move(s.train);
    sets.test = std::move(s.test);
  }
  if (rc.data.valid) {
    sets.valid = load_checked(*rc.data.valid, rc, "data.valid", out);
  } else {
    auto s = split_rows(sets.train, rc.data.valid_fraction, rc, "split.valid");
    sets.train = std::move(s.train);
    sets.valid = std::move(s.test);
  }
  return sets;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw IoError("write failure on '" + path.string() + "'");
}

int cmd_train(const CommonFlags& flags, std::ostream& out) {
  const auto rc = load_run_config(flags.config, flags.overrides, flags.seed);
  const auto sets = prepare_sets(rc, false, out);
  const model::Network net(rc.model, rc.schema);
  const auto result = train::train(net, sets.train, sets.valid, rc.train);

  model::save_checkpoint(rc.output.checkpoint, {rc.schema, rc.model, result.best});
  std::ostringstream csv;
  train::write_metric_csv(csv, result.log);
  write_file(rc.output.log, csv.str());

  out << "best epoch " << result.best_epoch << ": valid auc=" << fixed(result.best_valid_auc)
      << " logloss=" << fixed(result.best_valid_logloss) << "\n";
  if (!sets.test.empty()) {
    const auto ev = train::evaluate(net, result.best, sets.test);
    out << "test auc=" << fixed(ev.auc) << " logloss=" << fixed(ev.logloss) << "\n";
  }
  out << "wrote " << rc.output.checkpoint.string() << " and " << rc.output.log.string() << "\n";
  return kSuccess;
}

int cmd_eval(const std::filesystem::path& checkpoint_path, const std::filesystem::path& data_path,
             char delimiter, std::ostream& out) {
  if (!std::filesystem::is_regular_file(checkpoint_path)) {
    throw ConfigError("--checkpoint", "file '" + checkpoint_path.string() + "' does not exist");
  }
  if (!std::filesystem::is_regular_file(data_path)) {
    throw ConfigError("--data", "file '" + data_path.string() + "' does not exist");
  }
  model::Checkpoint ck = [&] {
    try {
      return model::load_checkpoint(checkpoint_path);
    } catch (const FormatError& e) {
      throw ConfigError("--checkpoint", e.what());
    }
  }();
  const std::size_t f = ck.schema.num_fields();
  const auto cols = data::peek_column_count(data_path, delimiter);
  if (cols && *cols != f + 1) {
    throw ConfigError("--data", "schema mismatch: checkpoint has " + std::to_string(f) +
                                    " fields, data has " + std::to_string(*cols - 1));
  }
  const auto loaded = data::load_tsv(data_path, ck.schema, delimiter);
  if (loaded.examples.empty()) throw ConfigError("--data", "no well-formed rows");
  const model::Network net(ck.config, ck.schema);
  const auto ev = train::evaluate(net, ck.params, loaded.examples);
  out << "auc=" << fixed(ev.auc) << " logloss=" << fixed(ev.logloss) << "\n";
  return kSuccess;
}

void print_report(std::ostream& out, const train::GradCheckReport& report) {
  char line[160];
  for (const auto& b : report.blocks) {
    const char* status = b.status == train::BlockStatus::kPass   ? "pass"
                         : b.status == train::BlockStatus::kFail ? "FAIL"
                                                                  : "unused";
    std::snprintf(line, sizeof line, "  %-16s %12.3e  %s\n", b.name.c_str(), b.max_relative_error,
                  status);
    out << line;
  }
}

int cmd_gradcheck(const CommonFlags& flags, bool sweep, std::ostream& out) {
  auto doc_config = load_run_config(flags.config, flags.overrides, flags.seed);
  model::ModelConfig base = doc_config.model;
  base.num_fields = doc_config.gradcheck.fields;
  base.embedding_dim = doc_config.gradcheck.k;
  base.hidden_units = doc_config.gradcheck.hidden_units;
  base.dropout = 0.0;

  std::vector<model::ModelConfig> configs;
  if (sweep) {
    for (auto type : {model::FieldType::kAll, model::FieldType::kEach, model::FieldType::kInteraction}) {
      for (const char* code : {"00", "01", "10", "11"}) {
        for (auto mode : {model::Mode::kShallow, model::Mode::kDeep}) {
          for (auto ab : {model::Ablation::kNone, model::Ablation::kNoSe, model::Ablation::kNoBi,
                          model::Ablation::kFm, model::Ablation::kFnn, model::Ablation::kLr}) {
            auto c = base;
            c.field_type = type;
            c.combination = model::CombinationCode::parse(code);
            c.mode = mode;
            c.ablation = ab;
            configs.push_back(c);
          }
        }
      }
    }
  } else {
    configs.push_back(base);
  }

  bool all_passed = true;
  for (const auto& c : configs) {
    const auto report = train::grad_check(c, numeric::derive_seed(doc_config.seed, "gradcheck"),
                                          doc_config.gradcheck.options);
    all_passed = all_passed && report.passed();
    if (!sweep || !report.passed()) {
      out << "field_type=" << model::to_string(c.field_type) << " combination="
          << c.combination.to_string() << " mode=" << model::to_string(c.mode)
          << " ablation=" << model::to_string(c.ablation) << ": "
          << (report.passed() ? "pass" : "FAIL") << "\n";
      print_report(out, report);
    }
  }
  if (sweep) out << configs.size() << " configurations checked\n";
  out << (all_passed ? "gradient check passed\n" : "gradient check FAILED\n");
  return all_passed ? kSuccess : kRuntimeFailure;
}

int cmd_ablate(const CommonFlags& flags, std::ostream& out) {
  const auto rc = load_run_config(flags.config, flags.overrides, flags.seed);
  const auto sets = prepare_sets(rc, true, out);
  const auto rows = train::run_ablation(rc.model, rc.schema, sets.train, sets.valid, sets.test, rc.train);
  std::ostringstream csv;
  train::write_ablation_csv(csv, rows);
  write_file(rc.output.ablation, csv.str());
  for (const auto& row : rows) {
    char line[96];
    std::snprintf(line, sizeof line, "%-6s auc=%.6f logloss=%.6f\n", row.variant.c_str(), row.auc,
                  row.logloss);
    out << line;
  }
  out << "wrote " << rc.output.ablation.string() << "\n";
  return kSuccess;
}

int cmd_synth(const CommonFlags& flags, const std::string& prefix, std::ostream& out) {
  const auto rc = load_run_config(flags.config, flags.overrides, flags.seed);
  const auto synth = data::generate_synthetic(rc.synth);
  const std::string train_path = prefix + ".train.tsv";
  const std::string test_path = prefix + ".test.tsv";
  const std::string meta_path = prefix + ".json";
  std::ostringstream train_tsv, test_tsv;
  data::write_tsv(train_tsv, synth.train, rc.data.delimiter);
  data::write_tsv(test_tsv, synth.test, rc.data.delimiter);
  write_file(train_path, train_tsv.str());
  write_file(test_path, test_tsv.str());

  json pairs = json::array();
  for (const auto& p : rc.synth.pairs) pairs.push_back({p.left, p.right, p.weight});
  const json meta = {
      {"bayes_auc", synth.bayes_auc},
      {"seed", rc.seed},
      {"train", train_path},
      {"test", test_path},
      {"spec",
       {{"fields", rc.synth.num_fields},
        {"latent_dim", rc.synth.latent_dim},
        {"cardinality", rc.synth.cardinality},
        {"train_rows", rc.synth.train_rows},
        {"test_rows", rc.synth.test_rows},
        {"bias", rc.synth.bias},
        {"pairs", pairs},
        {"noise_rate", rc.synth.noise_rate}}},
  };
  write_file(meta_path, meta.dump(2) + "\n");
  out << "bayes_auc=" << fixed(synth.bayes_auc) << "\nwrote " << train_path << ", " << test_path
      << ", " << meta_path << "\n";
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FiBiNET click-through-rate model: train, evaluate, check and ablate", "fibinet"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto add_common = [&flags](CLI::App* cmd) {
    cmd->add_option("--config", flags.config, "JSON run configuration");
    cmd->add_option("--set", flags.overrides, "Override a config key: dotted.key=value")
        ->allow_extra_args(false);
    cmd->add_option("--seed", flags.seed, "Top-level seed (overrides the config)");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model; write checkpoint and metric CSV");
  add_common(train_cmd);

  std::filesystem::path checkpoint_path, data_path;
  std::string delimiter = "\t";
  auto* eval_cmd = app.add_subcommand("eval", "Score a TSV file with a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data_path, "TSV data file")->required();
  eval_cmd->add_option("--delimiter", delimiter, "Column delimiter (default: tab)");

  bool sweep = false;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  add_common(grad_cmd);
  grad_cmd->add_flag("--all", sweep, "Check every field type, combination, mode and ablation");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train BASE, NO-SE, NO-BI, FM and FNN variants");
  add_common(ablate_cmd);

  std::string prefix = "synthetic";
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted-interaction synthetic dataset");
  add_common(synth_cmd);
  synth_cmd->add_option("--out", prefix, "Output prefix for .train.tsv, .test.tsv and .json");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << "\n";
      return kSuccess;
    }
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(flags, out);
    if (eval_cmd->parsed()) {
      if (delimiter.size() != 1) throw ConfigError("--delimiter", "expected a single character");
      return cmd_eval(checkpoint_path, data_path, delimiter[0], out);
    }
    if (grad_cmd->parsed()) return cmd_gradcheck(flags, sweep, out);
    if (ablate_cmd->parsed()) return cmd_ablate(flags, out);
    if (synth_cmd->parsed()) return cmd_synth(flags, prefix, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace fibinet::cli

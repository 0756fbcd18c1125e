// Acceptance suite: one line per criterion, non-zero exit if any fails.
// Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fibinet/cli.hpp"
#include "fibinet/data.hpp"
#include "fibinet/metrics.hpp"
#include "fibinet/model.hpp"
#include "fibinet/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fibinet;
using model::Ablation;
using model::CombinationCode;
using model::FieldType;
using model::Mode;
using model::ModelConfig;
using numeric::Rng;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

data::Dataset random_rows(Rng& rng, const data::FieldSchema& schema, std::size_t n) {
  data::Dataset rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(oracle::random_example(rng, schema));
  return rows;
}

// 1: analytic vs. central-difference gradients over every configuration.
Outcome gradient_suite() {
  const auto start = Clock::now();
  std::size_t configs = 0, failed = 0;
  double worst = 0.0;
  std::string first_failure;
  for (auto type : {FieldType::kAll, FieldType::kEach, FieldType::kInteraction}) {
    for (const char* code : {"00", "01", "10", "11"}) {
      for (auto mode : {Mode::kShallow, Mode::kDeep}) {
        for (auto ab : {Ablation::kNone, Ablation::kNoSe, Ablation::kNoBi, Ablation::kFm,
                        Ablation::kFnn, Ablation::kLr}) {
          ModelConfig c;
          c.num_fields = 4;
          c.embedding_dim = 3;
          c.hidden_units = {5, 4};
          c.dropout = 0.0;
          c.field_type = type;
          c.combination = CombinationCode::parse(code);
          c.mode = mode;
          c.ablation = ab;
          const auto report = train::grad_check(c, 1000 + configs);
          ++configs;
          for (const auto& b : report.blocks) {
            if (b.status != train::BlockStatus::kUnused) worst = std::max(worst, b.max_relative_error);
          }
          if (!report.passed()) {
            ++failed;
            if (first_failure.empty()) {
              first_failure = fmt(" first failure: %s/%s/%s/%s", std::string(to_string(type)).c_str(),
                                  code, std::string(to_string(mode)).c_str(),
                                  std::string(to_string(ab)).c_str());
            }
          }
        }
      }
    }
  }
  const double secs = seconds_since(start);
  return {failed == 0 && worst < 1e-4 && secs < 120.0,
          fmt("%zu configurations, %zu failed, max rel err %.2e, %.2fs%s", configs, failed, worst,
              secs, first_failure.c_str())};
}

// 2: fm ablation against a textbook FM, fnn ablation against a direct MLP build.
Outcome degeneration() {
  Rng rng(2);
  double fm_err = 0.0, fnn_err = 0.0;
  bool structure = true;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t f = 3 + trial;
    const auto schema = data::FieldSchema::uniform(f, 11);
    ModelConfig c;
    c.num_fields = f;
    c.embedding_dim = 4;
    c.hidden_units = {6, 5};
    c.dropout = 0.0;

    c.ablation = Ablation::kFm;
    const model::Network fm(c, schema);
    auto fm_params = fm.initialize(rng);
    oracle::randomize(fm_params, rng);
    const auto rows = random_rows(rng, schema, 100);
    const auto y_fm = fm.predict(data::ExampleBatch::from_examples(rows), fm_params);
    for (std::size_t i = 0; i < rows.size(); ++i)
      fm_err = std::max(fm_err, std::abs(y_fm[i] - oracle::fm_probability(fm_params, rows[i])));

    c.ablation = Ablation::kFnn;
    const model::Network fnn(c, schema);
    const auto& arch = fnn.architecture();
    auto fnn_params = fnn.initialize(rng);
    oracle::randomize(fnn_params, rng);
    structure = structure && arch.raw_embedding_input && !arch.interactions && !arch.reweighted_path &&
                arch.deep && arch.combined_width == f * 4 &&
                fnn_params.dnn_weights.front().cols() == f * 4;
    for (const auto& name : fnn.active_blocks(fnn_params)) {
      if (name.rfind("senet", 0) == 0 || name.rfind("bilinear", 0) == 0) structure = false;
    }
    const auto y_fnn = fnn.predict(data::ExampleBatch::from_examples(rows), fnn_params);
    for (std::size_t i = 0; i < rows.size(); ++i)
      fnn_err = std::max(fnn_err, std::abs(y_fnn[i] - oracle::fnn_probability(fnn_params, rows[i])));
  }
  return {fm_err <= 1e-10 && fnn_err <= 1e-10 && structure,
          fmt("fm max |diff| %.2e, fnn max |diff| %.2e, fnn structure %s", fm_err, fnn_err,
              structure ? "ok" : "WRONG")};
}

// 3: bilinear parameter totals per path.
Outcome parameter_counts() {
  std::size_t checked = 0, wrong = 0;
  for (std::size_t f : {2u, 5u, 39u}) {
    for (std::size_t k : {1u, 10u}) {
      const auto schema = data::FieldSchema::uniform(f, 2);
      const std::pair<FieldType, std::size_t> expected[] = {
          {FieldType::kAll, k * k},
          {FieldType::kEach, f * k * k},
          {FieldType::kInteraction, f * (f - 1) / 2 * k * k}};
      for (const auto& [type, count] : expected) {
        for (bool shared : {false, true}) {
          ModelConfig c;
          c.num_fields = f;
          c.embedding_dim = k;
          c.field_type = type;
          c.share_bilinear = shared;
          c.hidden_units = {4};
          Rng rng(3);
          const auto p = model::ModelParams::initialize(c, schema, rng);
          for (bool path : {false, true}) {
            ++checked;
            if (p.bilinear_parameter_count(path) != count) ++wrong;
          }
        }
      }
    }
  }
  return {wrong == 0, fmt("%zu identities checked, %zu wrong", checked, wrong)};
}

// 4: identity bilinear matrices make code 11 coincide with code 00.
Outcome identity_collapse() {
  Rng rng(4);
  std::size_t batches = 0, mismatched = 0;
  for (auto type : {FieldType::kAll, FieldType::kEach, FieldType::kInteraction}) {
    for (auto mode : {Mode::kShallow, Mode::kDeep}) {
      for (int trial = 0; trial < 3; ++trial) {
        const std::size_t f = 4 + trial;
        const auto schema = data::FieldSchema::uniform(f, 13);
        ModelConfig c;
        c.num_fields = f;
        c.embedding_dim = 5;
        c.hidden_units = {8, 8};
        c.field_type = type;
        c.mode = mode;
        c.combination = CombinationCode::parse("11");
        const model::Network bilinear(c, schema);
        c.combination = CombinationCode::parse("00");
        const model::Network hadamard(c, schema);
        auto params = bilinear.initialize(rng);
        oracle::randomize(params, rng);
        for (auto& w : params.bilinear_p) w = model::DenseMatrix::identity(5);
        for (auto& w : params.bilinear_q) w = model::DenseMatrix::identity(5);
        const auto batch = data::ExampleBatch::from_examples(random_rows(rng, schema, 64));
        ++batches;
        if (bilinear.predict(batch, params) != hadamard.predict(batch, params)) ++mismatched;
      }
    }
  }
  return {mismatched == 0, fmt("%zu random batches, %zu not bit-identical", batches, mismatched)};
}

// 5: planted second-order data; deep model near the Bayes AUC, LR near chance.
Outcome synthetic_learning() {
  const auto start = Clock::now();
  data::SyntheticSpec spec;
  spec.num_fields = 10;
  spec.latent_dim = 4;
  spec.cardinality = 20;
  spec.train_rows = 50000;
  spec.test_rows = 10000;
  spec.pairs = {{0, 1, 2.0}, {2, 3, 2.0}, {4, 5, 2.0}, {6, 7, 2.0}, {8, 9, 2.0}};
  spec.seed = 20190906;
  const auto synth = data::generate_synthetic(spec);
  const auto split = data::split_train_test(synth.train, 0.1, 5);

  // Field-All, as in the paper's headline comparison tables.
  ModelConfig base;
  base.num_fields = 10;
  base.embedding_dim = 8;
  base.field_type = FieldType::kAll;
  base.hidden_units = {64, 64};
  base.dropout = 0.0;

  train::TrainConfig tc;
  tc.epochs = 20;
  tc.batch_size = 256;
  tc.patience = 2;
  tc.adam.learning_rate = 1e-3;
  tc.seed = 5;

  auto score = [&](Ablation ab) {
    auto c = base;
    c.ablation = ab;
    const model::Network net(c, spec.schema());
    const auto r = train::train(net, split.train, split.test, tc);
    return train::evaluate(net, r.best, synth.test).auc;
  };
  const double bayes = synth.bayes_auc;
  const double full = score(Ablation::kNone);
  const double lr = score(Ablation::kLr);
  const double no_bi = score(Ablation::kNoBi);
  const double no_se = score(Ablation::kNoSe);
  const double secs = seconds_since(start);
  const bool pass = full >= bayes - 0.03 && lr < bayes - 0.15 && no_bi <= full + 0.005 &&
                    no_se <= full + 0.005 && secs < 600.0;
  return {pass, fmt("bayes %.4f, BASE %.4f, LR %.4f, NO-BI %.4f, NO-SE %.4f, %.1fs", bayes, full, lr,
                    no_bi, no_se, secs)};
}

// 6: overfit 64 rows.
Outcome memorization() {
  data::SyntheticSpec spec;
  spec.num_fields = 10;
  spec.cardinality = 1000;
  spec.train_rows = 64;
  spec.test_rows = 1;
  spec.pairs = {{0, 1, 2.0}, {2, 3, 2.0}};
  spec.seed = 6;
  const auto rows = data::generate_synthetic(spec).train;

  ModelConfig c;
  c.num_fields = 10;
  c.hidden_units = {64, 64};
  c.dropout = 0.0;
  const model::Network net(c, spec.schema());
  Rng rng(6);
  auto params = net.initialize(rng);
  train::AdamState adam(params, {1e-3});
  const auto batch = data::ExampleBatch::from_examples(rows);
  double loss = net.loss(batch, params);
  std::size_t steps = 0;
  while (steps < 500 && loss >= 0.05) {
    auto trace = net.forward(batch, params, true);
    const auto tape = net.backward(trace, batch.labels, params);
    train::adam_step(params, tape, adam);
    ++steps;
    loss = net.loss(batch, params);
  }
  return {loss < 0.05, fmt("train logloss %.4f after %zu steps", loss, steps)};
}

// 7: rank-sum AUC against pair counting; logloss at one half.
Outcome metrics_oracle() {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(300);
    const std::uint64_t levels = trial % 3 == 0 ? 0 : 1 + rng.below(6);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = levels ? static_cast<double>(rng.below(levels)) / levels : rng.uniform();
      y[i] = rng.bernoulli(rng.uniform(0.05, 0.95));
    }
    y[0] = 1;
    y[1] = 0;
    worst = std::max(worst, std::abs(metrics::auc({s, y}) - oracle::auc_pairs(s, y)));
  }
  const std::vector<double> half{0.5};
  const std::vector<std::uint8_t> one{1};
  const double ll_err = std::abs(metrics::logloss({half, one}) - std::log(2.0));
  return {worst <= 1e-12 && ll_err <= 1e-12,
          fmt("1000 cases, max auc |diff| %.2e; logloss(1, 0.5) - ln2 = %.2e", worst, ll_err)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8: the train command twice gives byte-identical artifacts.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "fibinet_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run_once = [&](const std::string& tag) {
    std::ostringstream out, err;
    const std::vector<std::string> args{
        "train",       "--seed",
        "99",          "--set",
        "data.synthetic=true",
        "--set",       "synth.train_rows=5000",
        "--set",       "synth.test_rows=1000",
        "--set",       "model.k=6",
        "--set",       "model.hidden_units=[32,16]",
        "--set",       "model.dropout=0.5",
        "--set",       "train.epochs=2",
        "--set",       "train.batch_size=250",
        "--set",       "output.checkpoint=" + (dir / (tag + ".ckpt")).string(),
        "--set",       "output.log=" + (dir / (tag + ".csv")).string()};
    return cli::run(args, out, err);
  };
  const int a = run_once("a");
  const int b = run_once("b");
  const auto csv_a = slurp(dir / "a.csv"), csv_b = slurp(dir / "b.csv");
  const auto ck_a = slurp(dir / "a.ckpt"), ck_b = slurp(dir / "b.ckpt");
  fs::remove_all(dir);
  const bool pass = a == 0 && b == 0 && !csv_a.empty() && !ck_a.empty() && csv_a == csv_b && ck_a == ck_b;
  return {pass, fmt("exit codes %d/%d, csv %zu bytes %s, checkpoint %zu bytes %s", a, b, csv_a.size(),
                    csv_a == csv_b ? "identical" : "DIFFER", ck_a.size(),
                    ck_a == ck_b ? "identical" : "DIFFER")};
}

// Criteo-format rows: label, 13 integer columns (some empty or negative),
// 26 hex tokens (some empty). Returns the number of well-formed rows written;
// every 500th line is deliberately short and must be skipped.
std::size_t write_criteo_like(const fs::path& path, std::size_t rows) {
  std::ofstream out(path);
  Rng rng(9);
  std::size_t good = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    std::string line = std::to_string(rng.bernoulli(0.25) ? 1 : 0);
    const std::size_t cols = r % 500 == 499 ? 20 : 39;
    for (std::size_t c = 0; c < cols; ++c) {
      line += '\t';
      if (rng.bernoulli(0.1)) continue;
      if (c < 13) {
        const auto v = static_cast<long long>(std::exp(rng.uniform(0.0, 8.0))) - (c == 1 ? 3 : 0);
        line += std::to_string(v);
      } else {
        line += fmt("%08llx", static_cast<unsigned long long>(rng.below(40 + 200 * (c % 5))) * 2654435761ULL % 0xffffffffULL);
      }
    }
    out << line << '\n';
    if (cols == 39) ++good;
  }
  return good;
}

// 9: ingest, train one epoch and evaluate on a Criteo-format file.
Outcome criteo_smoke() {
  const auto start = Clock::now();
  fs::path path;
  std::optional<std::size_t> expected;
  std::size_t lines = 0;
  const fs::path scratch = fs::temp_directory_path() / "fibinet_acceptance_criteo.tsv";
  if (const char* env = std::getenv("FIBINET_CRITEO_SAMPLE"); env && *env) {
    path = env;
  } else {
    path = scratch;
    expected = write_criteo_like(path, 10000);
  }
  {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) lines += !line.empty();
  }
  const auto schema = data::FieldSchema::criteo(1000, 10000);
  const auto loaded = data::load_tsv(path, schema);
  const auto split = data::split_train_test(loaded.examples, 0.2, 9);
  const auto valid = data::split_train_test(split.train, 0.1, 10);

  ModelConfig c;
  c.num_fields = 39;
  c.embedding_dim = 4;
  c.hidden_units = {32, 32};
  const model::Network net(c, schema);
  train::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 500;
  tc.adam.learning_rate = 1e-3;
  const auto r = train::train(net, valid.train, valid.test, tc);
  const auto ev = train::evaluate(net, r.best, split.test);
  if (path == scratch) fs::remove(scratch);

  const bool accounted = loaded.examples.size() + loaded.skipped == lines;
  const bool none_lost = !expected || loaded.examples.size() == *expected;
  const bool finite = std::isfinite(ev.logloss) && std::isfinite(ev.auc);
  return {accounted && none_lost && finite && !loaded.examples.empty(),
          fmt("%zu lines, %zu loaded, %zu skipped%s; test auc %.4f logloss %.4f, %.1fs", lines,
              loaded.examples.size(), loaded.skipped,
              expected ? fmt(" (expected %zu well-formed)", *expected).c_str() : "", ev.auc,
              ev.logloss, seconds_since(start))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"FM and FNN degeneration", degeneration},
      {"bilinear parameter counts", parameter_counts},
      {"identity-bilinear collapse", identity_collapse},
      {"synthetic learning", synthetic_learning},
      {"memorization", memorization},
      {"metrics oracle", metrics_oracle},
      {"determinism", determinism},
      {"Criteo-format smoke", criteo_smoke},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fibinet/errors.hpp"
#include "fibinet/data.hpp"
#include "fibinet/metrics.hpp"
#include "oracles.hpp"

using namespace fibinet::data;

namespace {

Dataset numbered_rows(std::size_t n) {
  Dataset rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({static_cast<std::uint8_t>(i % 2), {static_cast<std::uint32_t>(i), 0}, {1.0, 1.0}});
  }
  return rows;
}

std::vector<std::uint32_t> ids(const Dataset& rows) {
  std::vector<std::uint32_t> out;
  for (const auto& r : rows) out.push_back(r.indices[0]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("schema construction") {
  CHECK_THROWS_AS(FieldSchema({{"a", FieldKind::kCategorical, 3}}), fibinet::ConfigError);
  CHECK_THROWS_AS(FieldSchema({{"a", FieldKind::kCategorical, 3}, {"b", FieldKind::kCategorical, 0}}),
                  fibinet::ConfigError);
  const auto criteo = FieldSchema::criteo(100, 1000);
  CHECK(criteo.num_fields() == 39);
  CHECK(criteo.field(12).kind == FieldKind::kContinuous);
  CHECK(criteo.field(13).kind == FieldKind::kCategorical);
}

TEST_CASE("hash_feature") {
  CHECK(hash_feature(5, "anything", 1) == 0u);
  CHECK(hash_feature(2, "tok", 1000) == hash_feature(2, "tok", 1000));
  CHECK(hash_feature(3, "abc", 1000) == oracle::fnv1a("3:abc") % 1000);
  CHECK(hash_feature(3, "abc", 1000) == 872u);
  CHECK(hash_feature(0, "hello", 97) == 96u);
  // The field index is part of the key.
  CHECK(oracle::fnv1a("0:x") != oracle::fnv1a("1:x"));
}

TEST_CASE("hash_feature stays in bounds on random tokens") {
  fibinet::numeric::Rng rng(123);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string token;
    const auto len = rng.below(12);
    for (std::uint64_t c = 0; c < len; ++c) token.push_back(static_cast<char>(rng.below(256)));
    const auto buckets = static_cast<std::uint32_t>(1 + rng.below(5000));
    const auto field = static_cast<std::size_t>(rng.below(40));
    const auto h = hash_feature(field, token, buckets);
    CHECK(h < buckets);
    CHECK(h == oracle::fnv1a(std::to_string(field) + ":" + token) % buckets);
  }
}

TEST_CASE("discretize_continuous") {
  CHECK(discretize_continuous(0.0) == "0");
  CHECK(discretize_continuous(std::nullopt) == "missing");
  CHECK(discretize_continuous(100.0) == "21");
  CHECK(static_cast<int>(std::floor(std::pow(std::log(101.0), 2))) == 21);
  CHECK(discretize_continuous(2.0) == "1");
  CHECK(discretize_continuous(-3.0) == "neg");
}

TEST_CASE("parse_tsv") {
  const auto schema = FieldSchema::uniform(2, 1000);

  SUBCASE("empty input") {
    std::istringstream in("");
    const auto r = parse_tsv(in, schema);
    CHECK(r.examples.empty());
    CHECK(r.skipped == 0);
  }
  SUBCASE("one well-formed line") {
    std::istringstream in("1\tabc\txyz\n");
    const auto r = parse_tsv(in, schema);
    REQUIRE(r.examples.size() == 1);
    CHECK(r.examples[0].label == 1);
    CHECK(r.examples[0].indices[0] == oracle::fnv1a("0:abc") % 1000);
    CHECK(r.examples[0].indices[1] == oracle::fnv1a("1:xyz") % 1000);
    CHECK(r.examples[0].values == std::vector<double>{1.0, 1.0});
  }
  SUBCASE("wrong column count is skipped") {
    std::istringstream in("0\ta\tb\n1\ta\n0\tc\td\n");
    const auto r = parse_tsv(in, schema);
    CHECK(r.examples.size() == 2);
    CHECK(r.skipped == 1);
  }
  SUBCASE("bad label names the line") {
    std::istringstream in("0\ta\tb\n7\ta\tb\n");
    try {
      parse_tsv(in, schema);
      FAIL("expected ParseError");
    } catch (const fibinet::ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("continuous fields hash their discretized token") {
    const FieldSchema mixed({{"i1", FieldKind::kContinuous, 50}, {"c1", FieldKind::kCategorical, 50}});
    std::istringstream in("1\t100\tq\n0\t\tq\n1\tnotanumber\tq\n");
    const auto r = parse_tsv(in, mixed);
    REQUIRE(r.examples.size() == 2);
    CHECK(r.skipped == 1);
    CHECK(r.examples[0].indices[0] == oracle::fnv1a("0:21") % 50);
    CHECK(r.examples[1].indices[0] == oracle::fnv1a("0:missing") % 50);
  }
  SUBCASE("comma delimiter") {
    std::istringstream in("0,a,b\n");
    CHECK(parse_tsv(in, schema, ',').examples.size() == 1);
  }
}

TEST_CASE("load_tsv reports unreadable files") {
  CHECK_THROWS_AS(load_tsv("/nonexistent/definitely/missing.tsv", FieldSchema::uniform(2, 4)),
                  fibinet::IoError);
}

TEST_CASE("split_train_test") {
  const auto rows = numbered_rows(100000);
  const auto s = split_train_test(rows, 0.1, 77);
  const double share = static_cast<double>(s.test.size()) / 1e5;
  CHECK(std::abs(share - 0.1) <= 0.01);

  const auto again = split_train_test(rows, 0.1, 77);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  Dataset merged = s.train;
  merged.insert(merged.end(), s.test.begin(), s.test.end());
  CHECK(ids(merged) == ids(rows));
}

TEST_CASE("split_head_tail keeps order") {
  const auto rows = numbered_rows(10);
  const auto s = split_head_tail(rows, 0.3);
  REQUIRE(s.test.size() == 3);
  CHECK(s.test.front().indices[0] == 7u);
  CHECK(s.train.back().indices[0] == 6u);
}

TEST_CASE("batches") {
  const auto rows = numbered_rows(10);
  const auto plain = batches(rows, 4, std::nullopt);
  REQUIRE(plain.size() == 3);
  CHECK(plain[0].size == 4);
  CHECK(plain[1].size == 4);
  CHECK(plain[2].size == 2);
  CHECK(plain[0].index(0, 0) == 0u);

  const auto a = batches(rows, 3, 5);
  const auto b = batches(rows, 3, 5);
  std::vector<std::uint32_t> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].indices == b[i].indices);
    for (std::size_t r = 0; r < a[i].size; ++r) seen.push_back(a[i].index(r, 0));
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen == ids(rows));
}

TEST_CASE("generate_synthetic") {
  SyntheticSpec spec;
  spec.num_fields = 4;
  spec.train_rows = 4000;
  spec.test_rows = 4000;
  spec.seed = 3;

  SUBCASE("no signal") {
    const auto d = generate_synthetic(spec);
    double clicks = 0.0;
    for (const auto& r : d.train) clicks += r.label;
    CHECK(std::abs(clicks / 4000.0 - 0.5) < 0.05);
    CHECK(std::abs(d.bayes_auc - 0.5) <= 0.02);
  }
  SUBCASE("one strong pair") {
    spec.pairs = {{0, 1, 8.0}};
    const auto d = generate_synthetic(spec);
    CHECK(d.bayes_auc > 0.9);
  }
  SUBCASE("deterministic and in bounds") {
    spec.pairs = {{0, 1, 2.0}};
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.bayes_auc == b.bayes_auc);
    for (const auto& r : a.train)
      for (auto idx : r.indices) CHECK(idx < spec.cardinality);
  }
  SUBCASE("invalid pair is rejected") {
    spec.pairs = {{0, 9, 1.0}};
    CHECK_THROWS_AS(generate_synthetic(spec), fibinet::ConfigError);
  }
}

TEST_CASE("write_tsv round-trips through the loader") {
  SyntheticSpec spec;
  spec.num_fields = 3;
  spec.train_rows = 50;
  spec.test_rows = 1;
  const auto d = generate_synthetic(spec);
  std::ostringstream out;
  write_tsv(out, d.train);
  std::istringstream in(out.str());
  const auto r = parse_tsv(in, spec.schema());
  CHECK(r.skipped == 0);
  REQUIRE(r.examples.size() == d.train.size());
  for (std::size_t i = 0; i < d.train.size(); ++i) CHECK(r.examples[i].label == d.train[i].label);
}

}  // TEST_SUITE

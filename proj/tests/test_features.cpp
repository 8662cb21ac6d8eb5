#include <algorithm>
#include <cmath>
#include <limits>

#include "adnfm/errors.hpp"
#include "adnfm/features.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adnfm;

namespace {

std::vector<std::string_view> views(const std::vector<std::string>& row) { return {row.begin(), row.end()}; }

const std::vector<FieldDescriptor> kOneCat{{"c", FieldKind::kCategorical}};

}  // namespace

TEST_SUITE("features") {

TEST_CASE("vocabulary counts and min_count filtering") {
  const std::vector<std::vector<std::string>> recs{{"a"}, {"a"}, {"b"}};
  const FeatureSchema s1 = build_schema(kOneCat, recs, 1);
  CHECK(s1.field(0).cardinality == 3);
  CHECK(s1.dimension() == 3);
  CHECK(s1.lookup(0, "a") == 1);
  CHECK(s1.lookup(0, "b") == 2);
  CHECK(s1.lookup(0, "zzz") == 0);

  const FeatureSchema s2 = build_schema(kOneCat, recs, 2);
  CHECK(s2.field(0).cardinality == 2);
  CHECK(s2.dimension() == 2);
  CHECK(s2.lookup(0, "b") == 0);
  const auto enc = encode(views({"b"}), s2);
  CHECK(enc.entries == std::vector<FeatureEntry>{{0, 1.0}});
}

TEST_CASE("build_schema errors") {
  CHECK_THROWS_AS(build_schema(kOneCat, {}, 1), DataError);
  CHECK_THROWS_AS(build_schema(kOneCat, {{"a"}}, 0), ConfigError);
  const std::vector<FieldDescriptor> dup{{"c", FieldKind::kCategorical}, {"c", FieldKind::kNumeric}};
  CHECK_THROWS_AS(build_schema(dup, {{"a", "1"}}, 1), ConfigError);
}

TEST_CASE("schema is independent of distinct-value order but deterministic") {
  const std::vector<std::vector<std::string>> a{{"x"}, {"y"}, {"x"}};
  const std::vector<std::vector<std::string>> b{{"y"}, {"x"}, {"x"}};
  CHECK(build_schema(kOneCat, a, 1) == build_schema(kOneCat, a, 1));
  CHECK(build_schema(kOneCat, a, 1) == build_schema(kOneCat, b, 1));
}

TEST_CASE("offsets partition the feature space in descriptor order") {
  const std::vector<FieldDescriptor> desc{
      {"n", FieldKind::kNumeric}, {"c", FieldKind::kCategorical}, {"g", FieldKind::kMultiCategorical}};
  const FeatureSchema s = build_schema(desc, {{"3", "a", "x|y"}, {"", "b", "z"}}, 1);
  REQUIRE(s.num_fields() == 3);
  CHECK(s.field(0).offset == 0);
  CHECK(s.field(0).cardinality == kNumericBuckets);
  CHECK(s.field(1).offset == kNumericBuckets);
  CHECK(s.field(1).cardinality == 3);
  CHECK(s.field(2).offset == kNumericBuckets + 3);
  CHECK(s.field(2).cardinality == 4);
  CHECK(s.dimension() == kNumericBuckets + 3 + 4);
  for (std::uint32_t g = 0; g < s.dimension(); ++g) {
    const auto& f = s.field(s.field_of(g));
    CHECK((g >= f.offset && g < f.offset + f.cardinality));
  }
}

TEST_CASE("schema constructor rejects broken layouts") {
  FieldSpec a{"a", FieldKind::kCategorical, 2, 0, {"x"}};
  FieldSpec gap{"b", FieldKind::kCategorical, 2, 3, {"y"}};
  CHECK_THROWS_AS(FeatureSchema({a, gap}), ConfigError);
  FieldSpec tiny{"b", FieldKind::kCategorical, 1, 2, {}};
  CHECK_THROWS_AS(FeatureSchema({a, tiny}), ConfigError);
  FieldSpec vocab_mismatch{"b", FieldKind::kCategorical, 3, 2, {"y"}};
  CHECK_THROWS_AS(FeatureSchema({a, vocab_mismatch}), ConfigError);
  FieldSpec num{"n", FieldKind::kNumeric, 8, 2, {}};
  CHECK_THROWS_AS(FeatureSchema({a, num}), ConfigError);
}

TEST_CASE("bucketize rule") {
  CHECK(bucketize(std::nullopt) == 0);
  CHECK(bucketize(std::numeric_limits<double>::quiet_NaN()) == 0);
  CHECK(bucketize(-0.5) == 1);
  CHECK(bucketize(0.0) == 2);
  CHECK(bucketize(0.99) == 2);
  CHECK(bucketize(1.0) == 3);
  CHECK(bucketize(1.5) == 3);  // 3 + floor(log2 1.5)
  CHECK(bucketize(2.0) == 4);
  CHECK(bucketize(8.0) == 6);
  CHECK(bucketize(1e300) == 31);
  CHECK(bucketize(std::numeric_limits<double>::infinity()) == 31);
}

TEST_CASE("bucketize stays below the numeric cardinality") {
  Pcg32 rng(2);
  for (int i = 0; i < 5000; ++i) {
    const double x = std::ldexp(rng.normal(), static_cast<int>(rng.below(200)) - 100);
    CHECK(bucketize(x) < kNumericBuckets);
    CHECK(bucketize(x) >= 1);
  }
}

TEST_CASE("encode per field kind") {
  const std::vector<FieldDescriptor> desc{
      {"n", FieldKind::kNumeric}, {"c", FieldKind::kCategorical}, {"g", FieldKind::kMultiCategorical}};
  const FeatureSchema s = build_schema(desc, {{"3", "a", "x|y"}, {"", "b", "z"}}, 1);
  const auto e = encode(views({"8", "b", "x|z"}), s);
  const std::uint32_t c0 = s.field(1).offset, g0 = s.field(2).offset;
  CHECK(e.field_begin == std::vector<std::uint32_t>{0, 1, 2, 4});
  CHECK(e.entries[0] == FeatureEntry{6, 1.0});
  CHECK(e.entries[1] == FeatureEntry{c0 + 2, 1.0});
  CHECK(e.entries[2] == FeatureEntry{g0 + 1, 0.5});
  CHECK(e.entries[3] == FeatureEntry{g0 + 3, 0.5});

  const auto missing = encode(views({"", "", ""}), s);
  CHECK(missing.entries == std::vector<FeatureEntry>{{0, 1.0}, {c0, 1.0}, {g0, 1.0}});
  validate_sample(missing.view(), s);

  CHECK_THROWS_AS(encode(views({"abc", "a", "x"}), s), DataError);
  CHECK_THROWS_AS(encode(views({"1", "a"}), s), DataError);
}

TEST_CASE("encoded samples satisfy the schema invariants") {
  Pcg32 rng(17);
  const std::vector<FieldDescriptor> desc{
      {"n", FieldKind::kNumeric}, {"c", FieldKind::kCategorical}, {"g", FieldKind::kMultiCategorical}};
  std::vector<std::vector<std::string>> recs;
  for (int i = 0; i < 300; ++i) {
    std::string genres;
    const auto n = rng.below(4);
    for (std::uint32_t k = 0; k < n; ++k) genres += (k ? "|" : "") + std::string(1, static_cast<char>('a' + rng.below(8)));
    recs.push_back({rng.below(5) == 0 ? "" : std::to_string(rng.normal() * 100.0), "v" + std::to_string(rng.below(20)), genres});
  }
  const FeatureSchema s = build_schema(desc, recs, 2);
  for (const auto& r : recs) {
    const auto e = encode(views(r), s);
    validate_sample(e.view(), s);
    for (std::size_t f = 0; f < s.num_fields(); ++f) {
      const auto fe = e.view().field(f);
      REQUIRE(!fe.empty());
      if (s.field(f).kind != FieldKind::kMultiCategorical) CHECK(fe.size() == 1);
      double total = 0.0;
      for (const auto& x : fe) {
        CHECK(x.weight > 0.0);
        CHECK(s.field_of(x.index) == f);
        total += x.weight;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("validate_sample flags out-of-field indices") {
  const FeatureSchema s = build_schema({{"a", FieldKind::kCategorical}, {"b", FieldKind::kCategorical}},
                                       {{"x", "y"}}, 1);
  EncodedSample bad;
  bad.entries = {{2, 1.0}, {2, 1.0}};
  bad.field_begin = {0, 1, 2};
  CHECK_THROWS_AS(validate_sample(bad.view(), s), SchemaMismatch);
  bad.entries = {{0, 1.0}, {3, 0.0}};
  CHECK_THROWS_AS(validate_sample(bad.view(), s), SchemaMismatch);
}

TEST_CASE("decode inverts encode for in-vocabulary values") {
  const FeatureSchema s = build_schema(kOneCat, {{"q"}, {"p"}}, 1);
  CHECK(s.decode(s.lookup(0, "p")) == std::optional<std::string>("p"));
  CHECK(s.decode(s.lookup(0, "q")) == std::optional<std::string>("q"));
  CHECK_FALSE(s.decode(0).has_value());
}

TEST_CASE("schema json round trip") {
  const std::vector<FieldDescriptor> desc{
      {"n", FieldKind::kNumeric}, {"c", FieldKind::kCategorical}, {"g", FieldKind::kMultiCategorical}};
  const FeatureSchema s = build_schema(desc, {{"3", "a", "x|y"}, {"", "b", "z"}}, 1);
  const FeatureSchema back = FeatureSchema::from_json(s.to_json());
  CHECK(back == s);
  CHECK(back.lookup(1, "b") == s.lookup(1, "b"));
  CHECK(back.fingerprint() == s.fingerprint());
}

TEST_CASE("split_multi_value") {
  CHECK(split_multi_value("a|b|c") == std::vector<std::string_view>{"a", "b", "c"});
  CHECK(split_multi_value("a") == std::vector<std::string_view>{"a"});
}

}  // TEST_SUITE

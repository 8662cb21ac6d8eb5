#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "adnfm/data.hpp"
#include "adnfm/errors.hpp"
#include "adnfm/metrics.hpp"
#include "adnfm/model.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace adnfm;

namespace {

const std::vector<FieldDescriptor> kTwo{{"n", FieldKind::kNumeric}, {"c", FieldKind::kCategorical}};

std::string criteo_row(int label, int seed) {
  std::string row = std::to_string(label);
  for (int i = 0; i < 13; ++i) row += "\t" + (i == 3 ? std::string() : std::to_string((seed * 7 + i) % 50));
  for (int i = 0; i < 26; ++i) row += "\t" + (i == 5 ? std::string() : "h" + std::to_string((seed + i) % 4));
  return row + "\n";
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("load_table builds the schema and encodes rows") {
  fixture::TempDir dir;
  fixture::write_file(dir / "t.tsv", "1\t3\ta\n0\t\tb\n0\t-2\ta\n");
  const Dataset ds = load_table(dir / "t.tsv", kTwo, Task::kCtr, {});
  REQUIRE(ds.size() == 3);
  CHECK(ds.stats.rows_read == 3);
  CHECK(ds.stats.rows_skipped == 0);
  CHECK(ds.samples[0].label == 1.0);
  CHECK(ds.samples[0].entries[0].index == bucketize(3.0));
  CHECK(ds.samples[1].entries[0].index == 0);
  CHECK(ds.samples[2].entries[0].index == 1);
  CHECK(ds.schema->field(1).cardinality == 3);
}

TEST_CASE("malformed rows are skipped until the threshold") {
  fixture::TempDir dir;
  std::string text;
  for (int i = 0; i < 19; ++i) text += std::to_string(i % 2) + "\t1\tx\n";
  text += "1\tonly-two-columns\n";
  fixture::write_file(dir / "ok.tsv", text);
  const Dataset ds = load_table(dir / "ok.tsv", kTwo, Task::kCtr, {});
  CHECK(ds.size() == 19);
  CHECK(ds.stats.rows_skipped == 1);

  fixture::write_file(dir / "bad.tsv", text + "7\t1\tx\n2\t1\tx\n");
  CHECK_THROWS_AS(load_table(dir / "bad.tsv", kTwo, Task::kCtr, {}), DataError);
  CHECK_THROWS_AS(load_table(dir / "missing.tsv", kTwo, Task::kCtr, {}), DataError);
}

TEST_CASE("max_rows and a supplied schema") {
  fixture::TempDir dir;
  fixture::write_file(dir / "a.tsv", "1\t1\ta\n0\t2\tb\n1\t3\tc\n");
  LoadOptions opts;
  opts.max_rows = 2;
  const Dataset ds = load_table(dir / "a.tsv", kTwo, Task::kCtr, opts);
  CHECK(ds.size() == 2);
  CHECK(ds.schema->field(1).cardinality == 3);  // only a, b seen

  fixture::write_file(dir / "b.tsv", "0\t1\tc\n1\t1\ta\n");
  const Dataset reuse = load_with_schema(dir / "b.tsv", ds.schema, Task::kCtr);
  CHECK(reuse.schema == ds.schema);
  CHECK(reuse.samples[0].entries[1].index == ds.schema->field(1).offset);  // c is OOV

  const auto narrow = std::make_shared<const FeatureSchema>(build_schema(
      {{"c", FieldKind::kCategorical}}, {{"a"}}, 1));
  CHECK_THROWS_AS(load_with_schema(dir / "b.tsv", narrow, Task::kCtr), SchemaMismatch);
}

TEST_CASE("criteo layout") {
  fixture::TempDir dir;
  std::string text;
  for (int i = 0; i < 12; ++i) text += criteo_row(i % 3 == 0, i);
  fixture::write_file(dir / "c.tsv", text);
  const Dataset ds = load_criteo(dir / "c.tsv", {});
  REQUIRE(ds.size() == 12);
  CHECK(ds.schema->num_fields() == 39);
  CHECK(ds.schema->field(0).name == "I1");
  CHECK(ds.schema->field(13).name == "C1");
  // I4 and C6 are empty in every row and land on OOV.
  CHECK(ds.samples[0].entries[3].index == ds.schema->field(3).offset);
  CHECK(ds.samples[0].entries[18].index == ds.schema->field(18).offset);
  for (const auto& s : ds.samples) validate_sample(s.view(), *ds.schema);
}

TEST_CASE("movielens layout") {
  fixture::TempDir dir;
  fixture::write_file(dir / "movies.csv",
                      "movieId,title,genres\n1,Toy Story (1995),Adventure|Animation|Children\n"
                      "2,\"Heat, The (1995)\",Action|Crime\n");
  fixture::write_file(dir / "ratings.csv",
                      "userId,movieId,rating,timestamp\n1,1,4.0,964982703\n1,2,3.5,964981247\n"
                      "2,1,5.0,964982224\n2,3,1.0,964983815\n");
  const Dataset ds = load_movielens(dir / "ratings.csv", dir / "movies.csv", {});
  REQUIRE(ds.size() == 4);
  CHECK(ds.task == Task::kRegression);
  CHECK(ds.schema->num_fields() == 3);
  CHECK(ds.samples[1].label == 3.5);
  const auto genres = ds.samples[0].view().field(2);
  CHECK(genres.size() == 3);
  for (const auto& e : genres) CHECK(e.weight == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // Movie 3 has no movies.csv entry.
  CHECK(ds.samples[3].view().field(2).size() == 1);
  CHECK(ds.samples[3].view().field(2)[0].index == ds.schema->field(2).offset);

  fixture::write_file(dir / "bad.csv", "user,movie,rating\n1,1,4\n");
  CHECK_THROWS_AS(load_movielens(dir / "bad.csv", dir / "movies.csv", {}), DataError);
}

TEST_CASE("split is a seeded partition with the requested sizes") {
  Pcg32 rng(4);
  const auto schema = std::make_shared<const FeatureSchema>(oracle::random_schema(rng, 3, false));
  Dataset ds = oracle::random_dataset(rng, schema, Task::kCtr, 1000);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.samples[i].label = static_cast<double>(i);  // tag

  const SplitParts a = split(ds, {0.8, 0.1, 0.1}, 5);
  CHECK(a.train.size() == 800);
  CHECK(a.validation.size() == 100);
  CHECK(a.test.size() == 100);
  std::set<double> tags;
  for (const auto* part : {&a.train, &a.validation, &a.test}) {
    for (const auto& s : part->samples) tags.insert(s.label);
  }
  CHECK(tags.size() == 1000);

  const SplitParts b = split(ds, {0.8, 0.1, 0.1}, 5);
  const SplitParts c = split(ds, {0.8, 0.1, 0.1}, 6);
  CHECK(a.test.samples == b.test.samples);
  CHECK_FALSE(a.test.samples == c.test.samples);

  const auto order = split_order(ds.size(), 5);
  CHECK(a.train.samples[0].label == static_cast<double>(order[0]));
  CHECK(a.test.samples.back().label == static_cast<double>(order.back()));

  CHECK_THROWS_AS(split(ds, {0.8, 0.1, 0.2}, 1), ConfigError);
  Dataset small = ds;
  small.samples.resize(9);
  CHECK_THROWS_AS(split(small, {0.8, 0.1, 0.1}, 1), DataError);
}

TEST_CASE("batches pad multi-valued fields with zero-weight entries") {
  Pcg32 rng(8);
  const auto schema = std::make_shared<const FeatureSchema>(oracle::random_schema(rng, 4, true));
  const Dataset ds = oracle::random_dataset(rng, schema, Task::kCtr, 70);
  const auto bs = batches(ds, 32);
  REQUIRE(bs.size() == 3);
  CHECK(bs[2].size == 6);
  HyperParams hyper{4, 6, 2, 5};
  ModelParams p = init_params(ModelKind::kAdnFm, hyper, *schema, 1);
  oracle::scramble(p, rng, 0.3);

  std::size_t seen = 0;
  for (const Batch& b : bs) {
    for (std::size_t i = 0; i < b.size; ++i, ++seen) {
      const auto& s = ds.samples[seen];
      const SampleView row = b.row(i);
      CHECK(b.labels[i] == s.label);
      for (std::size_t f = 0; f < schema->num_fields(); ++f) {
        const auto padded = row.field(f);
        const auto real = s.view().field(f);
        REQUIRE(padded.size() >= real.size());
        for (std::size_t k = 0; k < real.size(); ++k) CHECK(padded[k] == real[k]);
        for (std::size_t k = real.size(); k < padded.size(); ++k) {
          CHECK(padded[k].weight == 0.0);
          CHECK(padded[k].index == schema->field(f).offset);
        }
      }
      CHECK(predict(p, row, Task::kCtr) == predict(p, s.view(), Task::kCtr));
    }
  }
  CHECK(seen == ds.size());
  CHECK_THROWS_AS(batches(ds, 0), ConfigError);
}

TEST_CASE("shuffled batch order covers every sample once") {
  const auto order = batch_order(257, 3);
  auto sorted = order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == oracle::iota(257));
  CHECK_FALSE(order == oracle::iota(257));
  CHECK(batch_order(10, std::nullopt) == oracle::iota(10));
}

TEST_CASE("synthetic generator") {
  SynthOptions opts;
  opts.n = 4000;
  const SynthData a = synth_interactions(opts);
  const SynthData b = synth_interactions(opts);
  CHECK(a.dataset.samples == b.dataset.samples);
  CHECK(a.true_logits == b.true_logits);
  CHECK(a.dataset.schema->num_fields() == 6);
  CHECK(a.truth.embeddings.size() == 6);
  CHECK(a.truth.embeddings[0].rows() == 100);
  CHECK(a.truth.embeddings[0].cols() == 4);

  // True logit = sum over field pairs of <u_i, u_j>, centered.
  for (std::size_t r = 0; r < 20; ++r) {
    double raw = 0.0;
    const auto& vals = a.values[r];
    for (std::size_t i = 0; i < vals.size(); ++i) {
      for (std::size_t j = i + 1; j < vals.size(); ++j) {
        for (std::size_t k = 0; k < 4; ++k) {
          raw += a.truth.embeddings[i](vals[i], k) * a.truth.embeddings[j](vals[j], k);
        }
      }
    }
    CHECK(a.true_logits[r] == doctest::Approx(raw - a.truth.logit_mean).epsilon(1e-12));
    // The encoded sample points at the token of the drawn value.
    for (std::size_t f = 0; f < vals.size(); ++f) {
      const auto idx = a.dataset.samples[r].entries[f].index;
      CHECK(a.dataset.schema->decode(idx) == std::optional<std::string>(synth_token(vals[f])));
    }
  }
  double mean = 0.0;
  for (double z : a.true_logits) mean += z;
  CHECK(std::abs(mean / static_cast<double>(opts.n)) < 1e-9);

  std::vector<double> labels;
  for (const auto& s : a.dataset.samples) labels.push_back(s.label);
  const auto bayes = oracle::pair_auc(a.true_logits, labels);
  REQUIRE(bayes.has_value());
  CHECK(*bayes >= 0.85);

  opts.fields = 1;
  CHECK_THROWS_AS(synth_interactions(opts), ConfigError);
}

TEST_CASE("write_synth output is byte-stable and reloads to the same encoding") {
  SynthOptions opts;
  opts.n = 500;
  opts.vocab = 12;
  const SynthData data = synth_interactions(opts);
  fixture::TempDir d1, d2;
  write_synth(data, d1.path());
  write_synth(synth_interactions(opts), d2.path());
  CHECK(fixture::read_file(d1 / "synth.tsv") == fixture::read_file(d2 / "synth.tsv"));
  CHECK(fixture::read_file(d1 / "ground_truth.tsv") == fixture::read_file(d2 / "ground_truth.tsv"));

  std::vector<FieldDescriptor> desc;
  for (std::size_t f = 0; f < opts.fields; ++f) desc.push_back({"c" + std::to_string(f + 1), FieldKind::kCategorical});
  const Dataset back = load_table(d1 / "synth.tsv", desc, Task::kCtr, {});
  CHECK(*back.schema == *data.dataset.schema);
  CHECK(back.samples == data.dataset.samples);
}

}  // TEST_SUITE

#include <cmath>
#include <sstream>

#include "adnfm/errors.hpp"
#include "adnfm/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adnfm;

namespace {

struct Fixture {
  Dataset train, val;
};

Fixture synth_fixture(std::size_t n, std::uint64_t seed) {
  SynthOptions opts;
  opts.n = n;
  opts.fields = 4;
  opts.vocab = 20;
  opts.seed = seed;
  const SynthData data = synth_interactions(opts);
  SplitParts parts = split(data.dataset, {0.8, 0.2, 0.0}, seed);
  return {std::move(parts.train), std::move(parts.validation)};
}

TrainConfig small_config(ModelKind kind) {
  TrainConfig cfg;
  cfg.kind = kind;
  cfg.hyper = {4, 8, 3, 6};
  cfg.epochs_max = 4;
  cfg.batch_size = 64;
  cfg.adam.learning_rate = 0.01;
  return cfg;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("adam with zero gradient leaves params unchanged") {
  Pcg32 rng(1);
  const FeatureSchema s = oracle::random_schema(rng, 3, false);
  ModelParams p = init_params(ModelKind::kAdnFm, {3, 4, 2, 3}, s, 1);
  const ModelParams before = p;
  Gradients g;
  g.dense = zero_params(ModelKind::kAdnFm, {3, 4, 2, 3}, s);
  g.dense.linear.clear();
  g.dense.factors = Matrix();
  g.sparse.factors = Matrix(0, 3);
  AdamState state = make_adam_state(p);
  adam_step(p, g, state, 1, AdamConfig{});
  CHECK(p == before);
}

TEST_CASE("adam single step on a scalar") {
  const FeatureSchema s({{"a", FieldKind::kCategorical, 2, 0, {"x"}}});
  ModelParams p = zero_params(ModelKind::kLr, {1, 1, 1, 1}, s);
  Gradients g;
  g.dense = zero_params(ModelKind::kLr, {1, 1, 1, 1}, s);
  g.dense.linear.clear();
  g.dense.bias = 1.0;
  g.sparse.rows = {1};
  g.sparse.linear = {1.0};
  AdamState state = make_adam_state(p);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(p, g, state, 1, cfg);
  // m_hat = 1, v_hat = 1, step = lr / (1 + eps).
  const double expect = -0.1 / (1.0 + 1e-8);
  CHECK(p.bias == doctest::Approx(expect).epsilon(1e-15));
  CHECK(p.linear[1] == doctest::Approx(expect).epsilon(1e-15));
  CHECK(p.linear[0] == 0.0);
  // Untouched sparse rows keep their moments.
  CHECK(state.m.linear[0] == 0.0);
  CHECK(state.v.linear[0] == 0.0);

  ModelParams q = zero_params(ModelKind::kLr, {1, 1, 1, 1}, s);
  AdamState again = make_adam_state(q);
  adam_step(q, g, again, 1, cfg);
  CHECK(q == p);
}

TEST_CASE("adam rejects mismatched shapes") {
  const FeatureSchema s({{"a", FieldKind::kCategorical, 2, 0, {"x"}}});
  ModelParams p = zero_params(ModelKind::kFm, {2, 1, 1, 1}, s);
  Gradients g;
  g.dense = zero_params(ModelKind::kDeepFm, {2, 1, 1, 1}, s);
  g.dense.linear.clear();
  g.dense.factors = Matrix();
  AdamState state = make_adam_state(p);
  CHECK_THROWS_AS(adam_step(p, g, state, 1, AdamConfig{}), ConfigError);
  Gradients bad_row;
  bad_row.dense = zero_params(ModelKind::kFm, {2, 1, 1, 1}, s);
  bad_row.dense.linear.clear();
  bad_row.dense.factors = Matrix();
  bad_row.sparse.rows = {5};
  bad_row.sparse.linear = {1.0};
  bad_row.sparse.factors = Matrix(1, 2);
  CHECK_THROWS_AS(adam_step(p, bad_row, state, 1, AdamConfig{}), ConfigError);
}

TEST_CASE("zero epochs returns the initial params") {
  const Fixture fx = synth_fixture(400, 1);
  TrainConfig cfg = small_config(ModelKind::kAdnFm);
  cfg.epochs_max = 0;
  const TrainResult r = train(cfg, fx.train, fx.val);
  CHECK(r.history.epochs.empty());
  CHECK(r.best == init_params(cfg.kind, cfg.hyper, *fx.train.schema, cfg.seed));
}

TEST_CASE("zero learning rate keeps the initial params bit-exactly") {
  const Fixture fx = synth_fixture(400, 1);
  TrainConfig cfg = small_config(ModelKind::kAdnFm);
  cfg.adam.learning_rate = 0.0;
  cfg.epochs_max = 2;
  const TrainResult r = train(cfg, fx.train, fx.val);
  CHECK(r.best == init_params(cfg.kind, cfg.hyper, *fx.train.schema, cfg.seed));
}

TEST_CASE("training is deterministic") {
  const Fixture fx = synth_fixture(600, 2);
  const TrainConfig cfg = small_config(ModelKind::kAdnFm);
  const TrainResult a = train(cfg, fx.train, fx.val);
  const TrainResult b = train(cfg, fx.train, fx.val);
  CHECK(a.best == b.best);
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].train_loss == b.history.epochs[i].train_loss);
    CHECK(a.history.epochs[i].val_metric == b.history.epochs[i].val_metric);
    CHECK(a.history.epochs[i].mean_alpha == b.history.epochs[i].mean_alpha);
  }
}

TEST_CASE("history contract") {
  const Fixture fx = synth_fixture(800, 3);
  for (ModelKind kind : all_model_kinds()) {
    for (EvalMetric metric : {EvalMetric::kLogLoss, EvalMetric::kAuc}) {
      TrainConfig cfg = small_config(kind);
      cfg.eval_metric = metric;
      std::ostringstream progress;
      const TrainResult r = train(cfg, fx.train, fx.val, &progress);
      REQUIRE(!r.history.epochs.empty());
      REQUIRE(r.history.best_epoch >= 1);
      const auto& best = r.history.epochs[r.history.best_epoch - 1];
      CHECK(metric_value(evaluate(r.best, fx.val), metric) == best.val_metric);
      for (const auto& e : r.history.epochs) {
        CHECK(e.samples_seen == fx.train.size());
        if (metric == EvalMetric::kAuc) CHECK(e.val_metric <= best.val_metric);
        else CHECK(e.val_metric >= best.val_metric);
        if (uses_attention(kind)) {
          REQUIRE(e.mean_alpha.size() == 3);
          double total = 0.0;
          for (double a : e.mean_alpha) total += a;
          CHECK(std::abs(total - 1.0) < 1e-9);
        } else {
          CHECK(e.mean_alpha.empty());
        }
      }
      CHECK(progress.str().rfind("epoch=1\ttrain_loss=", 0) == 0);
    }
  }
}

TEST_CASE("single-layer attention trace is exactly one") {
  const Fixture fx = synth_fixture(400, 4);
  TrainConfig cfg = small_config(ModelKind::kAdnFm);
  cfg.hyper.depth = 1;
  cfg.epochs_max = 3;
  const TrainResult r = train(cfg, fx.train, fx.val);
  for (const auto& e : r.history.epochs) CHECK(e.mean_alpha == Vector{1.0});
}

TEST_CASE("early stopping honours patience") {
  const Fixture fx = synth_fixture(600, 5);
  TrainConfig cfg = small_config(ModelKind::kFm);
  cfg.adam.learning_rate = 0.05;
  cfg.epochs_max = 60;
  cfg.patience = 2;
  const TrainResult r = train(cfg, fx.train, fx.val);
  CHECK(r.history.epochs.size() < 60);
  CHECK(r.history.epochs.size() == r.history.best_epoch + 2);
}

TEST_CASE("train validates its inputs") {
  const Fixture fx = synth_fixture(400, 6);
  TrainConfig cfg = small_config(ModelKind::kFm);
  CHECK_THROWS_AS(train(cfg, fx.train, Dataset{{}, fx.train.schema, Task::kCtr, {}}), DataError);
  cfg.eval_metric = EvalMetric::kRmse;
  CHECK_THROWS_AS(train(cfg, fx.train, fx.val), ConfigError);
  cfg = small_config(ModelKind::kFm);
  cfg.patience = 0;
  CHECK_THROWS_AS(train(cfg, fx.train, fx.val), ConfigError);
  cfg = small_config(ModelKind::kFm);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(cfg, fx.train, fx.val), ConfigError);
  Pcg32 rng(7);
  const auto other = std::make_shared<const FeatureSchema>(oracle::random_schema(rng, 4, false));
  CHECK_THROWS_AS(train(small_config(ModelKind::kFm), fx.train, oracle::random_dataset(rng, other, Task::kCtr, 50)),
                  ConfigError);
  Dataset reg = fx.val;
  reg.task = Task::kRegression;
  CHECK_THROWS_AS(train(small_config(ModelKind::kFm), fx.train, reg), ConfigError);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const Fixture fx = synth_fixture(400, 8);
  Dataset reg = fx.train;
  reg.task = Task::kRegression;
  for (auto& s : reg.samples) s.label = 1e300;
  Dataset val = reg;
  TrainConfig cfg = small_config(ModelKind::kFm);
  cfg.eval_metric = EvalMetric::kRmse;
  try {
    train(cfg, reg, val);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 0") != std::string::npos);
    CHECK(msg.find("norm") != std::string::npos);
  }
}

TEST_CASE("evaluate reports") {
  const Fixture fx = synth_fixture(400, 9);
  const ModelParams z = zero_params(ModelKind::kAdnFm, {4, 8, 2, 6}, *fx.val.schema);
  const MetricsReport r = evaluate(z, fx.val);
  CHECK(r.values.at("logloss") == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r.values.at("auc") == 0.5);
  CHECK(r.n_samples == fx.val.size());

  Dataset one = fx.val;
  one.samples.resize(1);
  one.samples[0].label = 1.0;
  const MetricsReport u = evaluate(z, one);
  CHECK(u.auc_undefined);
  CHECK(u.values.count("logloss") == 1);
  CHECK_THROWS_AS(metric_value(u, EvalMetric::kAuc), DataError);

  Dataset reg = fx.val;
  reg.task = Task::kRegression;
  ModelParams b = zero_params(ModelKind::kFm, {4, 8, 2, 6}, *reg.schema);
  b.bias = 2.5;
  for (auto& s : reg.samples) s.label = 2.5;
  CHECK(evaluate(b, reg).values.at("rmse") == 0.0);
}

TEST_CASE("memorizes a tiny dataset") {
  Pcg32 rng(10);
  const auto schema = std::make_shared<const FeatureSchema>(oracle::random_schema(rng, 4, false));
  const Dataset ds = oracle::random_dataset(rng, schema, Task::kCtr, 64);
  TrainConfig cfg;
  cfg.kind = ModelKind::kAdnFm;
  cfg.hyper = {8, 32, 2, 16};
  cfg.epochs_max = 500;
  cfg.patience = 500;
  cfg.batch_size = 16;
  cfg.adam.learning_rate = 0.01;
  const TrainResult r = train(cfg, ds, ds);
  double lowest = 1e9;
  for (const auto& e : r.history.epochs) lowest = std::min(lowest, e.train_loss);
  CHECK(lowest < 0.05);
}

}  // TEST_SUITE

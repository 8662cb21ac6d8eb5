#include "adnfm/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "adnfm/errors.hpp"

namespace adnfm {

namespace {

bool lower_is_better(EvalMetric metric) { return metric != EvalMetric::kAuc; }

void adam_update(double& theta, double& m, double& v, double g, double lr, double c1, double c2,
                 const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
  const double m_hat = m / c1;
  const double v_hat = v / c2;
  theta -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
}

double l2_norm(ModelParams& params) {
  double total = 0.0;
  for (const auto& g : params.groups()) {
    for (double v : g.values) total += v * v;
  }
  return std::sqrt(total);
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1));
}

}  // namespace

std::string_view to_string(EvalMetric metric) {
  switch (metric) {
    case EvalMetric::kLogLoss:
      return "logloss";
    case EvalMetric::kAuc:
      return "auc";
    case EvalMetric::kRmse:
      return "rmse";
  }
  return "unknown";
}

EvalMetric eval_metric_from_string(std::string_view name) {
  if (name == "logloss") return EvalMetric::kLogLoss;
  if (name == "auc") return EvalMetric::kAuc;
  if (name == "rmse") return EvalMetric::kRmse;
  throw ConfigError("unknown eval metric '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  hyper.validate();
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
}

AdamState make_adam_state(const ModelParams& params) {
  AdamState state{params, params, 0};
  for (ModelParams* p : {&state.m, &state.v}) {
    for (const auto& g : p->groups()) std::fill(g.values.begin(), g.values.end(), 0.0);
  }
  return state;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, std::uint64_t t,
               const AdamConfig& cfg) {
  if (t < 1) throw ConfigError("adam step must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const double lr = cfg.learning_rate;

  auto theta = params.groups();
  auto m = state.m.groups();
  auto v = state.v.groups();
  if (theta.size() != m.size() || theta.size() != v.size()) throw ConfigError("adam state shape mismatch");

  // Dense groups, in declaration order, skipping the sparse linear/factors tables.
  std::vector<std::size_t> dense_ids;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i].values.size() != m[i].values.size() || theta[i].values.size() != v[i].values.size()) {
      throw ConfigError("adam state shape mismatch in " + theta[i].name);
    }
    if (theta[i].name != "linear" && theta[i].name != "factors") dense_ids.push_back(i);
  }
  const auto grad_groups = grads.dense.group_values();
  if (grad_groups.size() != dense_ids.size()) throw ConfigError("gradient group count mismatch");
  for (std::size_t j = 0; j < dense_ids.size(); ++j) {
    const std::size_t i = dense_ids[j];
    if (grad_groups[j].size() != theta[i].values.size()) {
      throw ConfigError("gradient shape mismatch in " + theta[i].name);
    }
    for (std::size_t k = 0; k < grad_groups[j].size(); ++k) {
      adam_update(theta[i].values[k], m[i].values[k], v[i].values[k], grad_groups[j][k], lr, c1, c2, cfg);
    }
  }

  const SparseRows& sparse = grads.sparse;
  const std::size_t K = params.factors.cols();
  if (!sparse.linear.empty() && sparse.linear.size() != sparse.rows.size()) {
    throw ConfigError("sparse linear gradient shape mismatch");
  }
  if (!sparse.factors.empty() && (sparse.factors.rows() != sparse.rows.size() || sparse.factors.cols() != K)) {
    throw ConfigError("sparse factor gradient shape mismatch");
  }
  for (std::size_t i = 0; i < sparse.rows.size(); ++i) {
    const std::uint32_t r = sparse.rows[i];
    if (!sparse.linear.empty()) {
      if (r >= params.linear.size()) throw ConfigError("sparse gradient row out of range");
      adam_update(params.linear[r], state.m.linear[r], state.v.linear[r], sparse.linear[i], lr, c1, c2, cfg);
    }
    if (!sparse.factors.empty()) {
      if (r >= params.factors.rows()) throw ConfigError("sparse gradient row out of range");
      const auto g = sparse.factors.row(i);
      auto p = params.factors.row(r);
      auto pm = state.m.factors.row(r);
      auto pv = state.v.factors.row(r);
      for (std::size_t k = 0; k < K; ++k) adam_update(p[k], pm[k], pv[k], g[k], lr, c1, c2, cfg);
    }
  }
  state.step = t;
}

MetricsReport evaluate(const ModelParams& params, const Dataset& ds) {
  if (ds.empty()) throw DataError("cannot evaluate on an empty dataset");
  const std::vector<double> preds = predict_all(params, ds);
  std::vector<double> labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) labels[i] = ds.samples[i].label;

  MetricsReport report;
  report.n_samples = ds.size();
  if (ds.task == Task::kRegression) {
    report.values["rmse"] = rmse(preds, labels);
    return report;
  }
  for (double y : labels) report.n_positive += y > 0.5 ? 1 : 0;
  const auto a = auc(preds, labels);
  if (a) {
    report.values["auc"] = *a;
  } else {
    report.auc_undefined = true;
  }
  report.values["logloss"] = logloss(preds, labels);
  return report;
}

double metric_value(const MetricsReport& report, EvalMetric metric) {
  const auto it = report.values.find(std::string(to_string(metric)));
  if (it == report.values.end()) {
    throw DataError("metric '" + std::string(to_string(metric)) + "' is undefined for this dataset");
  }
  return it->second;
}

Vector mean_attention(const ModelParams& params, const Dataset& ds, std::size_t probe_size) {
  if (!uses_attention(params.kind)) return {};
  const std::size_t n = std::min(probe_size, ds.size());
  Vector mean(params.hyper.depth, 0.0);
  if (n == 0) return mean;
  ForwardTrace trace;
  for (std::size_t i = 0; i < n; ++i) {
    forward(params, ds.samples[i].view(), ds.task, trace);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += trace.alpha[k];
  }
  for (double& a : mean) a /= static_cast<double>(n);
  return mean;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds, std::ostream* progress) {
  cfg.validate();
  if (train_ds.empty() || val_ds.empty()) throw DataError("training and validation sets must be non-empty");
  if (train_ds.task != val_ds.task || !(*train_ds.schema == *val_ds.schema)) {
    throw ConfigError("training and validation sets must share schema and task");
  }
  if (train_ds.task == Task::kRegression && cfg.eval_metric != EvalMetric::kRmse) {
    throw ConfigError("regression runs must use eval_metric rmse");
  }
  if (train_ds.task == Task::kCtr && cfg.eval_metric == EvalMetric::kRmse) {
    throw ConfigError("ctr runs must use eval_metric logloss or auc");
  }

  ModelParams params = init_params(cfg.kind, cfg.hyper, *train_ds.schema, cfg.seed);
  TrainResult result{params, {}};
  AdamState state = make_adam_state(params);
  const Task task = train_ds.task;
  const bool lower = lower_is_better(cfg.eval_metric);
  double best = lower ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = batch_order(train_ds.size(), epoch_seed(cfg.seed, epoch));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - begin);
      const Batch batch = make_batch(train_ds, std::span(order).subspan(begin, len));
      const Gradients grads = backward(params, batch, task);
      if (!std::isfinite(grads.mean_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batch_index << " (parameter norm "
            << l2_norm(params) << ")";
        throw NumericalError(msg.str());
      }
      adam_step(params, grads, state, state.step + 1, cfg.adam);
      loss_sum += grads.mean_loss * static_cast<double>(len);
      seen += len;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.samples_seen = seen;
    record.train_loss = loss_sum / static_cast<double>(seen);
    record.val_metric = metric_value(evaluate(params, val_ds), cfg.eval_metric);
    record.mean_alpha = mean_attention(params, val_ds, cfg.probe_size);
    record.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(record.val_metric)) {
      throw NumericalError("non-finite validation metric at epoch " + std::to_string(epoch));
    }

    const bool improved = lower ? record.val_metric < best : record.val_metric > best;
    if (improved) {
      best = record.val_metric;
      result.best = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (progress) {
      char buf[64];
      *progress << "epoch=" << epoch;
      std::snprintf(buf, sizeof(buf), "\ttrain_loss=%.6f\tval_%s=%.6f", record.train_loss,
                    std::string(to_string(cfg.eval_metric)).c_str(), record.val_metric);
      *progress << buf;
      for (std::size_t k = 0; k < record.mean_alpha.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "\talpha_%zu=%.6f", k + 1, record.mean_alpha[k]);
        *progress << buf;
      }
      *progress << '\n' << std::flush;
    }
    result.history.epochs.push_back(std::move(record));
    if (since_best >= cfg.patience) break;
  }
  return result;
}

}  // namespace adnfm

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "adnfm/data.hpp"
#include "adnfm/metrics.hpp"
#include "adnfm/model.hpp"

namespace adnfm {

enum class EvalMetric { kLogLoss, kAuc, kRmse };

std::string_view to_string(EvalMetric metric);
EvalMetric eval_metric_from_string(std::string_view name);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t epochs_max = 20;
  std::size_t batch_size = 256;
  AdamConfig adam;
  std::size_t patience = 3;
  std::uint64_t seed = 42;
  EvalMetric eval_metric = EvalMetric::kLogLoss;
  ModelKind kind = ModelKind::kAdnFm;
  HyperParams hyper;
  // Validation samples used for the per-epoch mean attention weights.
  std::size_t probe_size = 512;

  void validate() const;
};

// First and second moments for every parameter, plus the shared step count.
struct AdamState {
  ModelParams m;
  ModelParams v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const ModelParams& params);

// Bias-corrected Adam at step t >= 1. Dense groups are updated in full; for w
// and V only rows present in the gradient are touched, so untouched rows keep
// their stale moments. Throws ConfigError on shape mismatch.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, std::uint64_t t,
               const AdamConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  Vector mean_alpha;  // empty for kinds without attention
  double wall_ms = 0.0;
  std::size_t samples_seen = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

struct TrainResult {
  ModelParams best;
  TrainHistory history;
};

MetricsReport evaluate(const ModelParams& params, const Dataset& ds);
double metric_value(const MetricsReport& report, EvalMetric metric);

// Mean attention weights over the first probe_size samples of ds.
Vector mean_attention(const ModelParams& params, const Dataset& ds, std::size_t probe_size);

// Mini-batch Adam with validation early stopping. Returns the parameters of
// the best validation epoch. Progress lines go to progress when non-null.
// Throws NumericalError if a batch loss becomes non-finite.
TrainResult train(const TrainConfig& cfg, const Dataset& train_ds, const Dataset& val_ds,
                  std::ostream* progress = nullptr);

}  // namespace adnfm

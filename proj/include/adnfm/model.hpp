#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adnfm/data.hpp"
#include "adnfm/features.hpp"
#include "adnfm/numerics.hpp"

namespace adnfm {

// LR: b + <w, x>. FM: factorization machine. DNN: <q, H_L>. DeepFM: FM + <q, H_L>.
// AdnFM: FM + attention-pooled hidden layers. DenseFM: FM + <q_cat, [H_1..H_L]>.
enum class ModelKind { kLr, kFm, kDnn, kDeepFm, kAdnFm, kDenseFm };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);
std::span<const ModelKind> all_model_kinds();

bool uses_linear(ModelKind kind);     // b and w
bool uses_factors(ModelKind kind);    // V
bool uses_dense(ModelKind kind);      // hidden stack
bool uses_attention(ModelKind kind);  // W_a, b_a, h
bool uses_readout(ModelKind kind);    // q
bool uses_concat_readout(ModelKind kind);

struct HyperParams {
  std::size_t embedding_dim = 10;  // K, shared with the FM rank
  std::size_t hidden_width = 32;   // d
  std::size_t depth = 2;           // L
  std::size_t attention_dim = 32;  // e

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

struct DenseLayer {
  Matrix weight;
  Vector bias;
  bool operator==(const DenseLayer&) const = default;
};

// Every learnable parameter. Groups a kind does not use stay empty.
struct ModelParams {
  ModelKind kind = ModelKind::kAdnFm;
  HyperParams hyper;
  std::size_t num_fields = 0;

  double bias = 0.0;
  Vector linear;                   // w: D
  Matrix factors;                  // V: D x K
  std::vector<DenseLayer> layers;  // W^(0): d x FK, W^(k>=1): d x d
  Matrix attn_weight;              // W_a: e x d
  Vector attn_bias;                // b_a: e
  Vector attn_query;               // h: e
  Vector readout;                  // q: d
  Vector concat_readout;           // q_cat: L*d

  // All non-empty groups in fixed declaration order:
  // bias, linear, factors, layer<k>.weight, layer<k>.bias, attention.weight,
  // attention.bias, attention.query, readout, concat_readout.
  std::vector<NamedSlice> groups();
  std::vector<std::span<const double>> group_values() const;
  std::vector<std::string> group_names() const;
  std::size_t num_scalars() const;

  bool operator==(const ModelParams&) const = default;
};

// Zero-valued parameters with the exact shapes required by kind and hyper.
ModelParams zero_params(ModelKind kind, const HyperParams& hyper, const FeatureSchema& schema);

// b = 0, w = 0, V ~ N(0, 0.01^2), dense and attention weights Glorot-uniform,
// biases 0, q and q_cat ~ N(0, 0.01^2). Deterministic given seed.
ModelParams init_params(ModelKind kind, const HyperParams& hyper, const FeatureSchema& schema,
                        std::uint64_t seed);

// Throws ConfigError when any group's shape disagrees with kind/hyper/schema.
void validate_params(const ModelParams& params, const FeatureSchema& schema);

struct ForwardTrace {
  std::vector<Vector> hidden;    // H_0 (F*K, row f is field f's embedding), H_1..H_L
  std::vector<Vector> pre;       // pre-activations of H_1..H_L
  std::vector<Vector> attn_pre;  // W_a H_k + b_a, k = 1..L
  Vector scores;                 // alpha'
  Vector alpha;
  Vector pooled;                 // sum_k alpha_k H_k
  Vector factor_sum;             // sum_l v_l x_l over all active features
  double y_fm = 0.0;
  double y_deep = 0.0;
  double logit = 0.0;
  double p = 0.0;
};

// Row f holds e_f = sum over field f's entries of v_l x_l (F x K).
Matrix embed(const ModelParams& params, SampleView sample);

// b + <w, x> + 1/2 sum_f [(sum_l v_lf x_l)^2 - sum_l v_lf^2 x_l^2].
double fm_forward(const ModelParams& params, SampleView sample);

// Dense stack, attention over H_1..H_L and weighted pooling. h0 is the
// concatenated embedding. Fills the deep part of trace and returns y_Adn.
double adn_forward(const ModelParams& params, std::span<const double> h0, ForwardTrace& trace);

// Full forward for params.kind: fills trace and returns p.
double forward(const ModelParams& params, SampleView sample, Task task, ForwardTrace& trace);
ForwardTrace forward(const ModelParams& params, SampleView sample, Task task);
double predict(const ModelParams& params, SampleView sample, Task task);

inline constexpr double kProbabilityClamp = 1e-7;

// CTR: cross-entropy with p clamped to [1e-7, 1 - 1e-7]. Regression: (p - y)^2.
double loss(double p, double y, Task task);

// Sparse part of a gradient: only rows of w and V touched by the batch.
struct SparseRows {
  std::vector<std::uint32_t> rows;  // ascending
  Vector linear;                    // one value per row, empty when the kind has no w
  Matrix factors;                   // rows.size() x K, empty when the kind has no V
};

struct Gradients {
  ModelParams dense;  // same shapes as the params, except linear/factors left empty
  SparseRows sparse;
  double mean_loss = 0.0;  // batch loss at the parameters the gradient was taken at

  // Full-shape gradient in the parameters' layout, for checking and tests.
  ModelParams densify(const ModelParams& params) const;
};

// Mean-over-batch gradient. Samples are processed in fixed-size chunks whose
// partial sums are reduced in chunk order, so the result does not depend on
// the number of OpenMP threads.
Gradients backward(const ModelParams& params, const Batch& batch, Task task);

// Single-threaded reference: one left-to-right pass over the batch.
Gradients backward_serial(const ModelParams& params, const Batch& batch, Task task);

// Mean loss over the batch.
double batch_loss(const ModelParams& params, const Batch& batch, Task task);

// Per-sample predictions in dataset order; parallel over samples.
std::vector<double> predict_all(const ModelParams& params, const Dataset& ds);

}  // namespace adnfm

#include "adnfm/model.hpp"

#include <array>
#include <cmath>

#include "adnfm/errors.hpp"
#include "adnfm/rng.hpp"

namespace adnfm {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::array<ModelKind, 6> kAllKinds = {ModelKind::kLr,    ModelKind::kFm,    ModelKind::kDnn,
                                                ModelKind::kDeepFm, ModelKind::kAdnFm, ModelKind::kDenseFm};

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void fill_embedding(const ModelParams& params, SampleView sample, Vector& h0) {
  const std::size_t K = params.hyper.embedding_dim;
  h0.assign(sample.num_fields() * K, 0.0);
  for (std::size_t f = 0; f < sample.num_fields(); ++f) {
    double* e = h0.data() + f * K;
    for (const FeatureEntry& entry : sample.field(f)) {
      const auto v = params.factors.row(entry.index);
      for (std::size_t k = 0; k < K; ++k) e[k] += v[k] * entry.weight;
    }
  }
}

// Linear and pairwise FM terms; leaves sum_l v_l x_l in trace.factor_sum.
double fm_terms(const ModelParams& params, SampleView sample, ForwardTrace& trace) {
  double y = params.bias;
  for (const FeatureEntry& e : sample.entries) y += params.linear[e.index] * e.weight;
  if (!uses_factors(params.kind)) return y;

  const std::size_t K = params.hyper.embedding_dim;
  trace.factor_sum.assign(K, 0.0);
  Vector square_sum(K, 0.0);
  for (const FeatureEntry& e : sample.entries) {
    const auto v = params.factors.row(e.index);
    for (std::size_t k = 0; k < K; ++k) {
      const double vx = v[k] * e.weight;
      trace.factor_sum[k] += vx;
      square_sum[k] += vx * vx;
    }
  }
  double pairwise = 0.0;
  for (std::size_t k = 0; k < K; ++k) pairwise += trace.factor_sum[k] * trace.factor_sum[k] - square_sum[k];
  return y + 0.5 * pairwise;
}

// H_1..H_L from trace.hidden[0].
void dense_stack(const ModelParams& params, ForwardTrace& trace) {
  const std::size_t L = params.layers.size();
  trace.hidden.resize(L + 1);
  trace.pre.resize(L);
  for (std::size_t k = 0; k < L; ++k) {
    affine_into(params.layers[k].weight, trace.hidden[k], params.layers[k].bias, trace.pre[k]);
    Vector& h = trace.hidden[k + 1];
    h.resize(trace.pre[k].size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = trace.pre[k][i] > 0.0 ? trace.pre[k][i] : 0.0;
  }
}

double attention_pool(const ModelParams& params, ForwardTrace& trace) {
  const std::size_t L = params.layers.size();
  trace.attn_pre.resize(L);
  trace.scores.resize(L);
  for (std::size_t k = 0; k < L; ++k) {
    affine_into(params.attn_weight, trace.hidden[k + 1], params.attn_bias, trace.attn_pre[k]);
    double s = 0.0;
    for (std::size_t j = 0; j < trace.attn_pre[k].size(); ++j) {
      const double a = trace.attn_pre[k][j];
      s += params.attn_query[j] * (a > 0.0 ? a : 0.0);
    }
    trace.scores[k] = s;
  }
  trace.alpha = softmax(trace.scores);
  const std::size_t d = params.hyper.hidden_width;
  trace.pooled.assign(d, 0.0);
  for (std::size_t k = 0; k < L; ++k) {
    const Vector& h = trace.hidden[k + 1];
    for (std::size_t i = 0; i < d; ++i) trace.pooled[i] += trace.alpha[k] * h[i];
  }
  return dot(params.readout, trace.pooled);
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLr:
      return "lr";
    case ModelKind::kFm:
      return "fm";
    case ModelKind::kDnn:
      return "dnn";
    case ModelKind::kDeepFm:
      return "deepfm";
    case ModelKind::kAdnFm:
      return "adnfm";
    case ModelKind::kDenseFm:
      return "densefm";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  for (ModelKind kind : kAllKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::span<const ModelKind> all_model_kinds() { return kAllKinds; }

bool uses_linear(ModelKind kind) { return kind != ModelKind::kDnn; }
bool uses_factors(ModelKind kind) { return kind != ModelKind::kLr; }
bool uses_dense(ModelKind kind) { return kind != ModelKind::kLr && kind != ModelKind::kFm; }
bool uses_attention(ModelKind kind) { return kind == ModelKind::kAdnFm; }
bool uses_readout(ModelKind kind) {
  return kind == ModelKind::kDnn || kind == ModelKind::kDeepFm || kind == ModelKind::kAdnFm;
}
bool uses_concat_readout(ModelKind kind) { return kind == ModelKind::kDenseFm; }

void HyperParams::validate() const {
  if (embedding_dim < 1 || hidden_width < 1 || depth < 1 || attention_dim < 1) {
    throw ConfigError("hyperparameters K, d, L and e must all be >= 1");
  }
}

namespace {

// Calls add(name, values) for every non-empty group in declaration order.
template <typename Params, typename Add>
void visit_groups(Params& p, Add&& add) {
  auto visit = [&add](std::string name, auto values) {
    if (!values.empty()) add(std::move(name), values);
  };
  if (uses_linear(p.kind)) visit("bias", std::span(&p.bias, 1));
  visit("linear", std::span(p.linear));
  visit("factors", p.factors.values());
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    visit("layer" + std::to_string(k) + ".weight", p.layers[k].weight.values());
    visit("layer" + std::to_string(k) + ".bias", std::span(p.layers[k].bias));
  }
  visit("attention.weight", p.attn_weight.values());
  visit("attention.bias", std::span(p.attn_bias));
  visit("attention.query", std::span(p.attn_query));
  visit("readout", std::span(p.readout));
  visit("concat_readout", std::span(p.concat_readout));
}

}  // namespace

std::vector<NamedSlice> ModelParams::groups() {
  std::vector<NamedSlice> out;
  visit_groups(*this, [&out](std::string name, std::span<double> v) { out.push_back({std::move(name), v}); });
  return out;
}

std::vector<std::span<const double>> ModelParams::group_values() const {
  std::vector<std::span<const double>> out;
  visit_groups(*this, [&out](const std::string&, std::span<const double> v) { out.push_back(v); });
  return out;
}

std::vector<std::string> ModelParams::group_names() const {
  std::vector<std::string> out;
  visit_groups(*this, [&out](std::string name, std::span<const double>) { out.push_back(std::move(name)); });
  return out;
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = (uses_linear(kind) ? 1 : 0) + linear.size() + factors.size();
  for (const DenseLayer& l : layers) n += l.weight.size() + l.bias.size();
  return n + attn_weight.size() + attn_bias.size() + attn_query.size() + readout.size() + concat_readout.size();
}

ModelParams zero_params(ModelKind kind, const HyperParams& hyper, const FeatureSchema& schema) {
  hyper.validate();
  ModelParams p;
  p.kind = kind;
  p.hyper = hyper;
  p.num_fields = schema.num_fields();
  const std::size_t D = schema.dimension();
  const std::size_t K = hyper.embedding_dim;
  const std::size_t d = hyper.hidden_width;
  const std::size_t e = hyper.attention_dim;
  if (uses_linear(kind)) p.linear.assign(D, 0.0);
  if (uses_factors(kind)) p.factors = Matrix(D, K);
  if (uses_dense(kind)) {
    for (std::size_t k = 0; k < hyper.depth; ++k) {
      p.layers.push_back({Matrix(d, k == 0 ? p.num_fields * K : d), Vector(d, 0.0)});
    }
  }
  if (uses_attention(kind)) {
    p.attn_weight = Matrix(e, d);
    p.attn_bias.assign(e, 0.0);
    p.attn_query.assign(e, 0.0);
  }
  if (uses_readout(kind)) p.readout.assign(d, 0.0);
  if (uses_concat_readout(kind)) p.concat_readout.assign(hyper.depth * d, 0.0);
  return p;
}

ModelParams init_params(ModelKind kind, const HyperParams& hyper, const FeatureSchema& schema,
                        std::uint64_t seed) {
  ModelParams p = zero_params(kind, hyper, schema);
  Pcg32 rng(seed, kInitStream);
  auto glorot = [&rng](std::span<double> values, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : values) v = limit * (2.0 * rng.uniform() - 1.0);
  };
  for (double& v : p.factors.values()) v = 0.01 * rng.normal();
  for (DenseLayer& layer : p.layers) glorot(layer.weight.values(), layer.weight.cols(), layer.weight.rows());
  glorot(p.attn_weight.values(), p.attn_weight.cols(), p.attn_weight.rows());
  glorot(p.attn_query, p.attn_query.size(), 1);
  for (double& v : p.readout) v = 0.01 * rng.normal();
  for (double& v : p.concat_readout) v = 0.01 * rng.normal();
  return p;
}

void validate_params(const ModelParams& params, const FeatureSchema& schema) {
  const HyperParams& h = params.hyper;
  h.validate();
  const ModelKind kind = params.kind;
  const std::size_t D = schema.dimension();
  const std::size_t F = schema.num_fields();
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(std::string(to_string(kind)) + " parameters: bad shape for " + what);
  };
  require(params.num_fields == F, "field count");
  require(params.linear.size() == (uses_linear(kind) ? D : 0), "linear");
  require(uses_factors(kind) ? params.factors.rows() == D && params.factors.cols() == h.embedding_dim
                             : params.factors.empty(),
          "factors");
  require(params.layers.size() == (uses_dense(kind) ? h.depth : 0), "layer count");
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const DenseLayer& l = params.layers[k];
    require(l.weight.rows() == h.hidden_width && l.weight.cols() == (k == 0 ? F * h.embedding_dim : h.hidden_width) &&
                l.bias.size() == h.hidden_width,
            "layer" + std::to_string(k));
  }
  if (uses_attention(kind)) {
    require(params.attn_weight.rows() == h.attention_dim && params.attn_weight.cols() == h.hidden_width &&
                params.attn_bias.size() == h.attention_dim && params.attn_query.size() == h.attention_dim,
            "attention");
  } else {
    require(params.attn_weight.empty() && params.attn_bias.empty() && params.attn_query.empty(), "attention");
  }
  require(params.readout.size() == (uses_readout(kind) ? h.hidden_width : 0), "readout");
  require(params.concat_readout.size() == (uses_concat_readout(kind) ? h.depth * h.hidden_width : 0),
          "concat_readout");
}

Matrix embed(const ModelParams& params, SampleView sample) {
  const std::size_t K = params.hyper.embedding_dim;
  Matrix E(sample.num_fields(), K);
  Vector h0;
  fill_embedding(params, sample, h0);
  std::copy(h0.begin(), h0.end(), E.values().begin());
  return E;
}

double fm_forward(const ModelParams& params, SampleView sample) {
  ForwardTrace trace;
  return fm_terms(params, sample, trace);
}

double adn_forward(const ModelParams& params, std::span<const double> h0, ForwardTrace& trace) {
  if (trace.hidden.empty()) trace.hidden.resize(1);
  if (h0.data() != trace.hidden[0].data()) trace.hidden[0].assign(h0.begin(), h0.end());
  dense_stack(params, trace);
  trace.y_deep = attention_pool(params, trace);
  return trace.y_deep;
}

double forward(const ModelParams& params, SampleView sample, Task task, ForwardTrace& trace) {
  const ModelKind kind = params.kind;
  trace.y_fm = 0.0;
  trace.y_deep = 0.0;
  if (uses_linear(kind)) trace.y_fm = fm_terms(params, sample, trace);
  if (uses_dense(kind)) {
    trace.hidden.resize(1);
    fill_embedding(params, sample, trace.hidden[0]);
    if (kind == ModelKind::kAdnFm) {
      adn_forward(params, trace.hidden[0], trace);
    } else {
      dense_stack(params, trace);
      if (kind == ModelKind::kDenseFm) {
        const std::size_t d = params.hyper.hidden_width;
        for (std::size_t k = 0; k < params.layers.size(); ++k) {
          trace.y_deep += dot(std::span<const double>(params.concat_readout).subspan(k * d, d), trace.hidden[k + 1]);
        }
      } else {
        trace.y_deep = dot(params.readout, trace.hidden.back());
      }
    }
  }
  trace.logit = trace.y_fm + trace.y_deep;
  trace.p = task == Task::kCtr ? sigmoid(trace.logit) : trace.logit;
  return trace.p;
}

ForwardTrace forward(const ModelParams& params, SampleView sample, Task task) {
  ForwardTrace trace;
  forward(params, sample, task, trace);
  return trace;
}

double predict(const ModelParams& params, SampleView sample, Task task) {
  ForwardTrace trace;
  return forward(params, sample, task, trace);
}

double loss(double p, double y, Task task) {
  if (task == Task::kRegression) return (p - y) * (p - y);
  const double c = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -y * std::log(c) - (1.0 - y) * std::log(1.0 - c);
}

}  // namespace adnfm

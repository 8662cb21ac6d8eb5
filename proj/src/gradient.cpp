#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "adnfm/model.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace adnfm {

namespace {

// Samples per reduction chunk. Fixed so the summation tree is independent of
// the thread count.
constexpr std::size_t kChunkSize = 32;

ModelParams dense_zeros_like(const ModelParams& params) {
  ModelParams g;
  g.kind = params.kind;
  g.hyper = params.hyper;
  g.num_fields = params.num_fields;
  for (const DenseLayer& l : params.layers) {
    g.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), Vector(l.bias.size(), 0.0)});
  }
  g.attn_weight = Matrix(params.attn_weight.rows(), params.attn_weight.cols());
  g.attn_bias.assign(params.attn_bias.size(), 0.0);
  g.attn_query.assign(params.attn_query.size(), 0.0);
  g.readout.assign(params.readout.size(), 0.0);
  g.concat_readout.assign(params.concat_readout.size(), 0.0);
  return g;
}

// dst += a * x y^T
void add_outer(Matrix& dst, double a, std::span<const double> x, std::span<const double> y) {
  for (std::size_t r = 0; r < dst.rows(); ++r) {
    const double s = a * x[r];
    if (s == 0.0) continue;
    auto row = dst.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += s * y[c];
  }
}

// dst += W^T x
void add_transposed(std::span<double> dst, const Matrix& W, std::span<const double> x) {
  for (std::size_t r = 0; r < W.rows(); ++r) {
    if (x[r] == 0.0) continue;
    const auto row = W.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) dst[c] += row[c] * x[r];
  }
}

// Sums per-sample gradients. Sparse rows are kept in first-touch order and
// sorted when the accumulator is finished.
class GradAccumulator {
 public:
  explicit GradAccumulator(const ModelParams& params)
      : dense_(dense_zeros_like(params)),
        K_(params.hyper.embedding_dim),
        has_linear_(uses_linear(params.kind)),
        has_factors_(uses_factors(params.kind)) {}

  void add(const ModelParams& params, SampleView sample, double label, Task task, const ForwardTrace& t) {
    const ModelKind kind = params.kind;
    const double g = task == Task::kCtr ? t.p - label : 2.0 * (t.p - label);
    loss_sum_ += loss(t.p, label, task);

    if (has_linear_) {
      dense_.bias += g;
      for (const FeatureEntry& e : sample.entries) {
        if (e.weight != 0.0) linear_[slot(e.index)] += g * e.weight;
      }
      if (has_factors_) {
        for (const FeatureEntry& e : sample.entries) {
          if (e.weight == 0.0) continue;
          const auto v = params.factors.row(e.index);
          double* dv = factor_row(slot(e.index));
          for (std::size_t k = 0; k < K_; ++k) {
            dv[k] += g * (e.weight * t.factor_sum[k] - v[k] * e.weight * e.weight);
          }
        }
      }
    }
    if (!uses_dense(kind)) return;

    const std::size_t L = params.layers.size();
    const std::size_t d = params.hyper.hidden_width;
    dH_.resize(L + 1);
    for (std::size_t k = 0; k <= L; ++k) dH_[k].assign(t.hidden[k].size(), 0.0);

    if (kind == ModelKind::kAdnFm) {
      attention_backward(params, g, t);
    } else if (kind == ModelKind::kDenseFm) {
      for (std::size_t k = 1; k <= L; ++k) {
        const auto q = std::span<const double>(params.concat_readout).subspan((k - 1) * d, d);
        auto dq = std::span<double>(dense_.concat_readout).subspan((k - 1) * d, d);
        for (std::size_t i = 0; i < d; ++i) {
          dq[i] += g * t.hidden[k][i];
          dH_[k][i] += g * q[i];
        }
      }
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        dense_.readout[i] += g * t.hidden[L][i];
        dH_[L][i] += g * params.readout[i];
      }
    }

    for (std::size_t k = L; k >= 1; --k) {
      dz_.resize(d);
      for (std::size_t i = 0; i < d; ++i) dz_[i] = t.pre[k - 1][i] > 0.0 ? dH_[k][i] : 0.0;
      add_outer(dense_.layers[k - 1].weight, 1.0, dz_, t.hidden[k - 1]);
      for (std::size_t i = 0; i < d; ++i) dense_.layers[k - 1].bias[i] += dz_[i];
      add_transposed(dH_[k - 1], params.layers[k - 1].weight, dz_);
    }

    for (std::size_t f = 0; f < sample.num_fields(); ++f) {
      const double* de = dH_[0].data() + f * K_;
      for (const FeatureEntry& e : sample.field(f)) {
        if (e.weight == 0.0) continue;
        double* dv = factor_row(slot(e.index));
        for (std::size_t k = 0; k < K_; ++k) dv[k] += e.weight * de[k];
      }
    }
  }

  void merge(const GradAccumulator& other) {
    loss_sum_ += other.loss_sum_;
    auto mine = dense_.groups();
    const auto theirs = other.dense_.group_values();
    for (std::size_t gi = 0; gi < mine.size(); ++gi) {
      for (std::size_t i = 0; i < mine[gi].values.size(); ++i) mine[gi].values[i] += theirs[gi][i];
    }
    for (std::size_t s = 0; s < other.rows_.size(); ++s) {
      const std::uint32_t mine_slot = slot(other.rows_[s]);
      if (has_linear_) linear_[mine_slot] += other.linear_[s];
      if (has_factors_) {
        double* dst = factor_row(mine_slot);
        const double* src = other.factors_.data() + s * K_;
        for (std::size_t k = 0; k < K_; ++k) dst[k] += src[k];
      }
    }
  }

  Gradients finish(std::size_t count) && {
    const double scale = 1.0 / static_cast<double>(count);
    Gradients out;
    out.dense = std::move(dense_);
    out.mean_loss = loss_sum_ * scale;
    for (const auto& g : out.dense.groups()) {
      for (double& v : g.values) v *= scale;
    }
    std::vector<std::uint32_t> order(rows_.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [this](std::uint32_t a, std::uint32_t b) { return rows_[a] < rows_[b]; });
    SparseRows& sparse = out.sparse;
    sparse.rows.reserve(order.size());
    if (has_linear_) sparse.linear.reserve(order.size());
    if (has_factors_) sparse.factors = Matrix(order.size(), K_);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::uint32_t s = order[i];
      sparse.rows.push_back(rows_[s]);
      if (has_linear_) sparse.linear.push_back(linear_[s] * scale);
      if (has_factors_) {
        auto dst = sparse.factors.row(i);
        for (std::size_t k = 0; k < K_; ++k) dst[k] = factors_[s * K_ + k] * scale;
      }
    }
    return out;
  }

 private:
  std::uint32_t slot(std::uint32_t row) {
    const auto [it, inserted] = slot_of_.try_emplace(row, static_cast<std::uint32_t>(rows_.size()));
    if (inserted) {
      rows_.push_back(row);
      if (has_linear_) linear_.push_back(0.0);
      if (has_factors_) factors_.resize(factors_.size() + K_, 0.0);
    }
    return it->second;
  }

  double* factor_row(std::uint32_t s) { return factors_.data() + s * K_; }

  void attention_backward(const ModelParams& params, double g, const ForwardTrace& t) {
    const std::size_t L = params.layers.size();
    const std::size_t d = params.hyper.hidden_width;
    const std::size_t e = params.hyper.attention_dim;

    // y = <q, pooled>, pooled = sum_k alpha_k H_k
    dalpha_.assign(L, 0.0);
    for (std::size_t i = 0; i < d; ++i) dense_.readout[i] += g * t.pooled[i];
    for (std::size_t k = 0; k < L; ++k) {
      const Vector& h = t.hidden[k + 1];
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double dp = g * params.readout[i];
        acc += dp * h[i];
        dH_[k + 1][i] += t.alpha[k] * dp;
      }
      dalpha_[k] = acc;
    }
    // Softmax Jacobian: ds_k = alpha_k (dalpha_k - sum_j alpha_j dalpha_j)
    double mean = 0.0;
    for (std::size_t k = 0; k < L; ++k) mean += t.alpha[k] * dalpha_[k];

    da_.resize(e);
    for (std::size_t k = 0; k < L; ++k) {
      const double ds = t.alpha[k] * (dalpha_[k] - mean);
      const Vector& a = t.attn_pre[k];
      for (std::size_t j = 0; j < e; ++j) {
        const bool active = a[j] > 0.0;
        dense_.attn_query[j] += active ? ds * a[j] : 0.0;
        da_[j] = active ? ds * params.attn_query[j] : 0.0;
      }
      add_outer(dense_.attn_weight, 1.0, da_, t.hidden[k + 1]);
      for (std::size_t j = 0; j < e; ++j) dense_.attn_bias[j] += da_[j];
      add_transposed(dH_[k + 1], params.attn_weight, da_);
    }
  }

  ModelParams dense_;
  double loss_sum_ = 0.0;
  std::size_t K_;
  bool has_linear_;
  bool has_factors_;
  std::unordered_map<std::uint32_t, std::uint32_t> slot_of_;
  std::vector<std::uint32_t> rows_;
  std::vector<double> linear_;
  std::vector<double> factors_;
  std::vector<Vector> dH_;
  Vector dz_, dalpha_, da_;
};

}  // namespace

Gradients backward_serial(const ModelParams& params, const Batch& batch, Task task) {
  GradAccumulator acc(params);
  ForwardTrace trace;
  for (std::size_t b = 0; b < batch.size; ++b) {
    forward(params, batch.row(b), task, trace);
    acc.add(params, batch.row(b), batch.labels[b], task, trace);
  }
  return std::move(acc).finish(std::max<std::size_t>(batch.size, 1));
}

Gradients backward(const ModelParams& params, const Batch& batch, Task task) {
  const std::size_t chunks = (batch.size + kChunkSize - 1) / kChunkSize;
  if (chunks <= 1) return backward_serial(params, batch, task);

  std::vector<GradAccumulator> parts;
  parts.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) parts.emplace_back(params);

#pragma omp parallel
  {
    ForwardTrace trace;
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
      const std::size_t begin = static_cast<std::size_t>(c) * kChunkSize;
      const std::size_t end = std::min(batch.size, begin + kChunkSize);
      for (std::size_t b = begin; b < end; ++b) {
        forward(params, batch.row(b), task, trace);
        parts[c].add(params, batch.row(b), batch.labels[b], task, trace);
      }
    }
  }
  for (std::size_t c = 1; c < chunks; ++c) parts[0].merge(parts[c]);
  return std::move(parts[0]).finish(batch.size);
}

double batch_loss(const ModelParams& params, const Batch& batch, Task task) {
  ForwardTrace trace;
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size; ++b) {
    total += loss(forward(params, batch.row(b), task, trace), batch.labels[b], task);
  }
  return total / static_cast<double>(batch.size);
}

std::vector<double> predict_all(const ModelParams& params, const Dataset& ds) {
  std::vector<double> out(ds.size());
#pragma omp parallel
  {
    ForwardTrace trace;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ds.size()); ++i) {
      out[i] = forward(params, ds.samples[i].view(), ds.task, trace);
    }
  }
  return out;
}

ModelParams Gradients::densify(const ModelParams& params) const {
  ModelParams full = dense;
  full.bias = dense.bias;
  full.linear.assign(params.linear.size(), 0.0);
  full.factors = Matrix(params.factors.rows(), params.factors.cols());
  for (std::size_t i = 0; i < sparse.rows.size(); ++i) {
    const std::uint32_t r = sparse.rows[i];
    if (!sparse.linear.empty()) full.linear[r] = sparse.linear[i];
    if (!sparse.factors.empty()) {
      const auto src = sparse.factors.row(i);
      std::copy(src.begin(), src.end(), full.factors.row(r).begin());
    }
  }
  return full;
}

}  // namespace adnfm

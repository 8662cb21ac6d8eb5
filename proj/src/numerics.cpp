#include "adnfm/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "adnfm/errors.hpp"

namespace adnfm {

void affine_into(const Matrix& W, std::span<const double> x, std::span<const double> b, Vector& out) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    std::ostringstream msg;
    msg << "affine: W is " << W.rows() << "x" << W.cols() << ", x has " << x.size()
        << ", b has " << b.size();
    throw ConfigError(msg.str());
  }
  out.resize(W.rows());
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const auto w = W.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) acc += w[c] * x[c];
    out[r] = acc + b[r];
  }
}

Vector affine(const Matrix& W, std::span<const double> x, std::span<const double> b) {
  Vector out;
  affine_into(W, x, b, out);
  return out;
}

Vector relu(std::span<const double> x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Vector softmax(std::span<const double> scores) {
  if (scores.empty()) throw ConfigError("softmax: empty input");
  const double top = *std::max_element(scores.begin(), scores.end());
  Vector out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double z = std::exp(a);
  return z / (1.0 + z);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const NamedSlice> params,
                           std::span<const NamedSlice> analytic, double eps, double tol) {
  if (eps < 1e-6 || eps > 1e-4) throw ConfigError("grad_check: eps must lie in [1e-6, 1e-4]");
  if (params.size() != analytic.size()) throw ConfigError("grad_check: group count mismatch");
  for (std::size_t g = 0; g < params.size(); ++g) {
    if (params[g].values.size() != analytic[g].values.size()) {
      throw ConfigError("grad_check: size mismatch in group " + params[g].name);
    }
  }
  const double first = loss();
  const double second = loss();
  if (first != second) throw NumericalError("grad_check: loss function is not deterministic");

  GradCheckReport report;
  std::string worst;
  for (std::size_t g = 0; g < params.size(); ++g) {
    auto theta = params[g].values;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + eps;
      const double up = loss();
      theta[i] = saved - eps;
      const double down = loss();
      theta[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double exact = analytic[g].values[i];
      const double diff = std::abs(numeric - exact);
      const double scale = std::max(std::abs(numeric), std::abs(exact));
      const double err = scale < 1e-8 ? diff : diff / scale;
      ++report.n_checked;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        worst = params[g].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  if (report.max_rel_err > tol) report.failing_param = worst;
  return report;
}

}  // namespace adnfm

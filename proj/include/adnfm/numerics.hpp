#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adnfm {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles with explicit dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Wx + b with left-to-right accumulation. Throws ConfigError on dimension mismatch.
Vector affine(const Matrix& W, std::span<const double> x, std::span<const double> b);
// Same as affine() but writes into out (resized to W.rows()).
void affine_into(const Matrix& W, std::span<const double> x, std::span<const double> b, Vector& out);

Vector relu(std::span<const double> x);

// Max-subtracted softmax. Throws ConfigError on empty input.
Vector softmax(std::span<const double> scores);

// Sign-branched logistic function; never produces NaN for finite input.
double sigmoid(double a);

bool all_finite(std::span<const double> x);

// Shortest decimal text that parses back to exactly v.
std::string format_double(double v);

// A named, mutable view over one block of scalar parameters.
struct NamedSlice {
  std::string name;
  std::span<double> values;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t n_checked = 0;
  // "<group>[<index>]" of the worst offender when max_rel_err exceeds tol.
  std::optional<std::string> failing_param;
};

// Compares analytic gradients against central differences for every scalar
// in params. loss reads the parameters through the spans in params, which
// are perturbed in place and restored. analytic must mirror params slice by
// slice. Relative error is used unless both magnitudes are below 1e-8, in
// which case the absolute error is reported. Throws ConfigError if eps is
// outside [1e-6, 1e-4] or shapes disagree, NumericalError if loss is not
// deterministic.
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const NamedSlice> params,
                           std::span<const NamedSlice> analytic, double eps, double tol);

}  // namespace adnfm

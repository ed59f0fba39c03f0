#include "ice/tensor.hpp"

#include <cmath>
#include <string>

#include "ice/error.hpp"

namespace ice {

Mat64::Mat64(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    throw InvalidArgument("Mat64: dimensions must be positive");
  }
}

Mat64::Mat64(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows == 0 || cols == 0) {
    throw InvalidArgument("Mat64: dimensions must be positive");
  }
  if (values_.size() != rows * cols) {
    throw InvalidArgument("Mat64: expected " + std::to_string(rows * cols) + " values, got " +
                          std::to_string(values_.size()));
  }
  if (!all_finite()) {
    throw InvalidArgument("Mat64: non-finite value");
  }
}

bool Mat64::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("dot: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) acc += a[t] * b[t];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

NormalizeResult l2_normalize_forward(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("l2_normalize: empty vector");
  const double norm = l2_norm(v);
  if (!(norm > kNormEpsilon) || !std::isfinite(norm)) {
    throw DegenerateInput("l2_normalize: vector norm " + std::to_string(norm) +
                          " has no usable direction");
  }
  NormalizeResult out{Vec64(v.begin(), v.end()), norm};
  for (double& x : out.unit) x /= norm;
  return out;
}

Vec64 l2_normalize_backward(std::span<const double> v, std::span<const double> upstream) {
  if (v.size() != upstream.size()) {
    throw InvalidArgument("l2_normalize_backward: dimension mismatch");
  }
  const auto [unit, norm] = l2_normalize_forward(v);
  const double radial = dot(upstream, unit);
  Vec64 grad(v.size());
  for (std::size_t t = 0; t < v.size(); ++t) {
    grad[t] = (upstream[t] - radial * unit[t]) / norm;
  }
  return grad;
}

Mat64 matmul_transposed(const Mat64& a, const Mat64& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("matmul_transposed: inner dimension mismatch");
  Mat64 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

}  // namespace ice

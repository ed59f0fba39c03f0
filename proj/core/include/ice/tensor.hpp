#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ice {

using Vec64 = std::vector<double>;

// Vectors with a smaller L2 norm have no direction and are rejected.
inline constexpr double kNormEpsilon = 1e-12;

// Dense row-major matrix of doubles.
class Mat64 {
 public:
  Mat64() = default;
  Mat64(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws InvalidArgument if values.size() != rows * cols or any value is
  // not finite.
  Mat64(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return values_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Mat64&, const Mat64&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Left-to-right accumulation; bit-identical across runs.
double dot(std::span<const double> a, std::span<const double> b);

double l2_norm(std::span<const double> v);

struct NormalizeResult {
  Vec64 unit;
  double norm = 0.0;
};

// v / ||v||. Throws DegenerateInput when ||v|| <= kNormEpsilon.
NormalizeResult l2_normalize_forward(std::span<const double> v);

// Vector-Jacobian product of v -> v/||v||:
//   (upstream - (upstream . n) n) / ||v||,  n = v/||v||.
Vec64 l2_normalize_backward(std::span<const double> v, std::span<const double> upstream);

// a * b^T for row-major a (n x k) and b (m x k).
Mat64 matmul_transposed(const Mat64& a, const Mat64& b);

}  // namespace ice

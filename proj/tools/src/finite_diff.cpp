#include "ice_app/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "ice/error.hpp"

namespace ice::app {

Mat64 central_difference(const std::function<double(const Mat64&)>& f, const Mat64& at, double h) {
  Mat64 probe = at;
  Mat64 grad(at.rows(), at.cols());
  for (std::size_t k = 0; k < at.size(); ++k) {
    const double x = at.values()[k];
    probe.values()[k] = x + h;
    const double up = f(probe);
    probe.values()[k] = x - h;
    const double down = f(probe);
    probe.values()[k] = x;
    grad.values()[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw InvalidArgument("relative_error: size mismatch");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
    scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace ice::app

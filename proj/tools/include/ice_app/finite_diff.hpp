#pragma once

#include <functional>
#include <span>

#include "ice/tensor.hpp"

namespace ice::app {

// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every entry.
Mat64 central_difference(const std::function<double(const Mat64&)>& f, const Mat64& at, double h);

// ||a - b||_inf / max(||a||_inf, ||b||_inf); 0 when both are zero.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

}  // namespace ice::app

#include "ice/cce.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ice/error.hpp"

namespace ice {
namespace {

struct PreparedFeatures {
  Mat64 used;   // features actually fed to the classifier
  Vec64 norms;  // original row norms when normalizing
};

PreparedFeatures prepare(const Mat64& features, const ClassifierHead& head, CceOptions options) {
  if (features.cols() != head.dim()) {
    throw InvalidArgument("cce: feature width " + std::to_string(features.cols()) +
                          " does not match head width " + std::to_string(head.dim()));
  }
  PreparedFeatures out{features, {}};
  if (options.normalize_features) {
    out.norms.resize(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r) {
      auto [unit, norm] = l2_normalize_forward(features.row(r));
      std::copy(unit.begin(), unit.end(), out.used.row(r).begin());
      out.norms[r] = norm;
    }
  }
  return out;
}

void check_targets(std::span<const Label> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) throw InvalidArgument("cce: label count does not match feature rows");
  for (Label y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidArgument("cce: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
  }
}

// Stable row softmax in place; returns log of each row's partition term
// relative to the logits.
Vec64 softmax_rows(Mat64& logits) {
  Vec64 log_z(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - peak);
      total += v;
    }
    for (double& v : row) v /= total;
    log_z[r] = peak + std::log(total);
  }
  return log_z;
}

}  // namespace

ClassifierHead::ClassifierHead(Mat64 weights) : weights_(std::move(weights)) {
  if (weights_.rows() < 2) throw InvalidArgument("ClassifierHead: need at least two classes");
  if (!weights_.all_finite()) throw InvalidArgument("ClassifierHead: non-finite weight");
}

Mat64 cce_probabilities(const Mat64& features, const ClassifierHead& head, CceOptions options) {
  const PreparedFeatures prepared = prepare(features, head, options);
  Mat64 probs = matmul_transposed(prepared.used, head.weights());
  softmax_rows(probs);
  return probs;
}

double cce_loss(const Mat64& features, std::span<const Label> labels, const ClassifierHead& head,
                CceOptions options) {
  check_targets(labels, features.rows(), head.num_classes());
  const PreparedFeatures prepared = prepare(features, head, options);
  Mat64 logits = matmul_transposed(prepared.used, head.weights());
  Mat64 probs = logits;
  const Vec64 log_z = softmax_rows(probs);
  double loss = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    loss += log_z[r] - logits(r, static_cast<std::size_t>(labels[r]));
  }
  return loss;
}

CceGradients cce_gradients(const Mat64& features, std::span<const Label> labels,
                           const ClassifierHead& head, CceOptions options) {
  check_targets(labels, features.rows(), head.num_classes());
  const PreparedFeatures prepared = prepare(features, head, options);
  Mat64 delta = matmul_transposed(prepared.used, head.weights());
  softmax_rows(delta);
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    delta(r, static_cast<std::size_t>(labels[r])) -= 1.0;
  }

  const Mat64& w = head.weights();
  CceGradients out{Mat64(features.rows(), features.cols()), Mat64(w.rows(), w.cols())};
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    auto grad_row = out.features.row(r);
    for (std::size_t k = 0; k < w.rows(); ++k) {
      const double d = delta(r, k);
      const auto wk = w.row(k);
      const auto fr = prepared.used.row(r);
      auto gw = out.weights.row(k);
      for (std::size_t t = 0; t < w.cols(); ++t) {
        grad_row[t] += d * wk[t];
        gw[t] += d * fr[t];
      }
    }
  }
  if (options.normalize_features) {
    for (std::size_t r = 0; r < features.rows(); ++r) {
      const Vec64 g = l2_normalize_backward(features.row(r), out.features.row(r));
      std::copy(g.begin(), g.end(), out.features.row(r).begin());
    }
  }
  return out;
}

}  // namespace ice

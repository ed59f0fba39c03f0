#pragma once

#include <cstddef>
#include <span>

#include "ice/ice_loss.hpp"
#include "ice/tensor.hpp"

namespace ice {

// T learned class context vectors, one row each. Storage is linear in T,
// which is what makes a class-level softmax unscalable to unbounded label
// sets.
class ClassifierHead {
 public:
  // Throws InvalidArgument if fewer than two rows or non-finite entries.
  explicit ClassifierHead(Mat64 weights);

  const Mat64& weights() const noexcept { return weights_; }
  std::size_t num_classes() const noexcept { return weights_.rows(); }
  std::size_t dim() const noexcept { return weights_.cols(); }
  std::size_t storage_bytes() const noexcept { return weights_.size() * sizeof(double); }

 private:
  Mat64 weights_;
};

struct CceOptions {
  // L2-normalize each feature row before the classifier.
  bool normalize_features = false;
};

// Row-wise softmax of features * W^T.
Mat64 cce_probabilities(const Mat64& features, const ClassifierHead& head, CceOptions options = {});

// -sum_i log softmax(f_i W^T)[y_i].
double cce_loss(const Mat64& features, std::span<const Label> labels, const ClassifierHead& head,
                CceOptions options = {});

struct CceGradients {
  Mat64 features;  // N x d
  Mat64 weights;   // T x d
};

CceGradients cce_gradients(const Mat64& features, std::span<const Label> labels,
                           const ClassifierHead& head, CceOptions options = {});

}  // namespace ice

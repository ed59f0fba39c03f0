#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ice/tensor.hpp"

namespace ice {

using Label = int;

struct ClassMembers {
  Label label = 0;
  std::vector<std::size_t> rows;
};

// N unit-norm embeddings with their class labels. Every class present must
// have at least two members so that each anchor has a positive.
class EmbeddingBatch {
 public:
  static constexpr double kUnitTolerance = 1e-9;

  // Throws InvalidArgument on shape mismatch, negative labels, a singleton
  // class, or a row whose norm differs from 1 by more than kUnitTolerance.
  EmbeddingBatch(Mat64 embeddings, std::vector<Label> labels);

  const Mat64& embeddings() const noexcept { return embeddings_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  // Sorted by label.
  const std::vector<ClassMembers>& class_index() const noexcept { return class_index_; }

  std::size_t size() const noexcept { return embeddings_.rows(); }
  std::size_t dim() const noexcept { return embeddings_.cols(); }
  std::size_t num_classes() const noexcept { return class_index_.size(); }

 private:
  Mat64 embeddings_;
  std::vector<Label> labels_;
  std::vector<ClassMembers> class_index_;
};

// Pairwise dot products of unit vectors.
class SimilarityMatrix {
 public:
  static constexpr double kTolerance = 1e-9;

  // Checks symmetry (1e-12), unit diagonal and the [-1, 1] range.
  explicit SimilarityMatrix(Mat64 values);

  std::size_t size() const noexcept { return values_.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }
  const Mat64& values() const noexcept { return values_; }

 private:
  Mat64 values_;
};

SimilarityMatrix similarity_matrix(const EmbeddingBatch& batch);

// p(x_i | x_a): the positive i competes against every negative of a; the
// other positives of a do not appear in the denominator. Similarities are
// multiplied by s.
double match_prob_pos(const SimilarityMatrix& sim, std::span<const Label> labels, std::size_t anchor,
                      std::size_t positive, double s);

// p(x_j | x_a, x_i): negative j under the distribution whose ground truth is
// positive i.
double match_prob_neg(const SimilarityMatrix& sim, std::span<const Label> labels, std::size_t anchor,
                      std::size_t positive, std::size_t negative, double s);

// -sum_a sum_{i != a, y_i = y_a} log p(x_i | x_a) with similarities scaled by s.
double ice_loss(const EmbeddingBatch& batch, double s);

enum class WeightStage { raw, scaled, normalized };

// Per (anchor, other) gradient magnitudes. Row a holds the weights of every
// other sample with respect to anchor a; entries for non-positives are zero
// in `pos` and entries for non-negatives are zero in `neg`.
struct IceWeights {
  Mat64 pos;
  Mat64 neg;
  WeightStage stage = WeightStage::raw;
  double s = 1.0;
};

// w_pos = 1 - p(x_i|x_a), w_neg = sum_i p(x_j|x_a,x_i), unscaled.
IceWeights raw_weights(const SimilarityMatrix& sim, std::span<const Label> labels);

// Same quantities with every similarity multiplied by s >= 1.
IceWeights scaled_weights(const SimilarityMatrix& sim, std::span<const Label> labels, double s);

// Per-anchor normalization: each anchor's positive set and negative set each
// sum to 1/(2N), so every anchor carries 1/N and the batch total is 1.
// Throws DegenerateInput if an anchor's positive or negative weights sum to
// zero.
IceWeights normalized_weights(const IceWeights& scaled, std::size_t batch_size);

enum class GradMode { exact, reweighted };

struct IceGradients {
  Mat64 grads;  // N x d, one row per embedding
  GradMode mode = GradMode::exact;
};

// True gradient of ice_loss(batch, s) with respect to every embedding row.
IceGradients ice_gradients_exact(const EmbeddingBatch& batch, double s);

struct ReweightOptions {
  // Also push the anchor row along the mirrored directions (-w f_i for
  // positives, +w f_j for negatives).
  bool anchor_grad = true;
};

// Gradient with magnitudes replaced by the normalized weights: for each
// anchor a, positive i receives -w_(i;a) f_a and negative j receives
// +w_(j;a) f_a. Not the gradient of any scalar.
IceGradients ice_gradients_reweighted(const EmbeddingBatch& batch, double s,
                                      ReweightOptions options = {});

// The vector that `other` receives from `anchor` under reweighting.
Vec64 reweighted_pair_contribution(const EmbeddingBatch& batch, const IceWeights& normalized,
                                   std::size_t anchor, std::size_t other);

struct LossAndGradients {
  double loss = 0.0;
  IceGradients gradients;
};

// Loss plus gradients from one pass over the anchors.
LossAndGradients ice_loss_and_gradients(const EmbeddingBatch& batch, double s, GradMode mode,
                                        ReweightOptions options = {});

namespace unchecked {

// ice_loss without the unit-norm requirement on rows, for finite-difference
// probes that step off the sphere. Label requirements still apply.
double ice_loss(const Mat64& rows, std::span<const Label> labels, double s);

}  // namespace unchecked

}  // namespace ice

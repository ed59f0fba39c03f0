#include "ice/ice_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "ice/error.hpp"

namespace ice {
namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_scale(double s) {
  if (!(s >= 1.0) || !std::isfinite(s)) {
    throw InvalidArgument("scaling parameter s must be finite and >= 1, got " + std::to_string(s));
  }
}

void check_labels(const Mat64& sim, std::span<const Label> labels) {
  if (sim.rows() != sim.cols()) throw InvalidArgument("similarity matrix must be square");
  if (labels.size() != sim.rows()) {
    throw InvalidArgument("expected " + std::to_string(sim.rows()) + " labels, got " +
                          std::to_string(labels.size()));
  }
}

// log sum_j exp(s * sim(a, j)) over the negatives of `anchor`.
double log_negative_mass(const Mat64& sim, std::span<const Label> labels, std::size_t anchor,
                         double s) {
  const Label y = labels[anchor];
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] != y) peak = std::max(peak, s * sim(anchor, j));
  }
  if (peak == -std::numeric_limits<double>::infinity()) {
    throw InvalidArgument("anchor " + std::to_string(anchor) + " has no negatives in the batch");
  }
  double mass = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] != y) mass += std::exp(s * sim(anchor, j) - peak);
  }
  return peak + std::log(mass);
}

// One anchor's share of the loss. Writes 1 - p(x_i|x_a) into pos_row[i] for
// every positive and sum_i p(x_j|x_a,x_i) into neg_row[j] for every
// negative; other entries are zeroed.
double anchor_terms(const Mat64& sim, std::span<const Label> labels, std::size_t anchor, double s,
                    std::span<double> pos_row, std::span<double> neg_row) {
  std::fill(pos_row.begin(), pos_row.end(), 0.0);
  std::fill(neg_row.begin(), neg_row.end(), 0.0);

  const Label y = labels[anchor];
  const double log_neg = log_negative_mass(sim, labels, anchor, s);

  double loss = 0.0;
  double miss_total = 0.0;  // sum_i (1 - p_i)
  bool has_positive = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i == anchor || labels[i] != y) continue;
    has_positive = true;
    const double z = log_neg - s * sim(anchor, i);
    loss += softplus(z);
    pos_row[i] = sigmoid(z);
    miss_total += pos_row[i];
  }
  // An anchor without positives has an empty product of probabilities.
  if (!has_positive) return 0.0;
  // p(x_j|x_a,x_i) = (1 - p_i) exp(s sim_aj - log_neg), summed over i.
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] != y) neg_row[j] = miss_total * std::exp(s * sim(anchor, j) - log_neg);
  }
  return loss;
}

// Scales one anchor's scaled weights so that each set sums to 1/(2N).
void normalize_anchor_row(std::span<double> pos_row, std::span<double> neg_row, std::size_t n,
                          std::size_t anchor) {
  double pos_total = 0.0;
  double neg_total = 0.0;
  for (double w : pos_row) pos_total += w;
  for (double w : neg_row) neg_total += w;
  if (!(pos_total > 0.0) || !(neg_total > 0.0) || !std::isfinite(pos_total) ||
      !std::isfinite(neg_total)) {
    throw DegenerateInput("cannot normalize weights of anchor " + std::to_string(anchor) +
                          ": accumulated weight is zero or non-finite");
  }
  const double two_n = 2.0 * static_cast<double>(n);
  for (double& w : pos_row) w = (w / pos_total) / two_n;
  for (double& w : neg_row) w = (w / neg_total) / two_n;
}

IceWeights weights_at(const Mat64& sim, std::span<const Label> labels, double s,
                      WeightStage stage) {
  const std::size_t n = sim.rows();
  IceWeights out{Mat64(n, n), Mat64(n, n), stage, s};
  for (std::size_t a = 0; a < n; ++a) anchor_terms(sim, labels, a, s, out.pos.row(a), out.neg.row(a));
  return out;
}

void add_scaled(std::span<double> dst, double coeff, std::span<const double> src) {
  for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += coeff * src[t];
}

double loss_over_anchors(const Mat64& sim, std::span<const Label> labels, double s) {
  const std::size_t n = sim.rows();
  Vec64 pos_row(n);
  Vec64 neg_row(n);
  double loss = 0.0;
  for (std::size_t a = 0; a < n; ++a) loss += anchor_terms(sim, labels, a, s, pos_row, neg_row);
  return loss;
}

}  // namespace

EmbeddingBatch::EmbeddingBatch(Mat64 embeddings, std::vector<Label> labels)
    : embeddings_(std::move(embeddings)), labels_(std::move(labels)) {
  if (embeddings_.empty()) throw InvalidArgument("EmbeddingBatch: empty batch");
  if (labels_.size() != embeddings_.rows()) {
    throw InvalidArgument("EmbeddingBatch: " + std::to_string(embeddings_.rows()) + " rows but " +
                          std::to_string(labels_.size()) + " labels");
  }
  if (!embeddings_.all_finite()) throw InvalidArgument("EmbeddingBatch: non-finite embedding");
  for (std::size_t r = 0; r < embeddings_.rows(); ++r) {
    const auto row = embeddings_.row(r);
    const double sq = dot(row, row);
    if (std::abs(sq - 1.0) > kUnitTolerance) {
      throw InvalidArgument("EmbeddingBatch: row " + std::to_string(r) + " is not unit norm");
    }
  }

  std::vector<std::pair<Label, std::size_t>> order;
  order.reserve(labels_.size());
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    if (labels_[r] < 0) throw InvalidArgument("EmbeddingBatch: negative label");
    order.emplace_back(labels_[r], r);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [label, row] : order) {
    if (class_index_.empty() || class_index_.back().label != label) {
      class_index_.push_back({label, {}});
    }
    class_index_.back().rows.push_back(row);
  }
  for (const auto& cls : class_index_) {
    if (cls.rows.size() < 2) {
      throw InvalidArgument("EmbeddingBatch: class " + std::to_string(cls.label) +
                            " has fewer than two members");
    }
  }
}

SimilarityMatrix::SimilarityMatrix(Mat64 values) : values_(std::move(values)) {
  const std::size_t n = values_.rows();
  if (n == 0 || values_.cols() != n) throw InvalidArgument("SimilarityMatrix: must be square");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(values_(i, i) - 1.0) > kTolerance) {
      throw InvalidArgument("SimilarityMatrix: diagonal entry " + std::to_string(i) + " is not 1");
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values_(i, j);
      if (!std::isfinite(v) || v < -1.0 - kTolerance || v > 1.0 + kTolerance) {
        throw InvalidArgument("SimilarityMatrix: entry out of [-1, 1]");
      }
      if (std::abs(v - values_(j, i)) > 1e-12) {
        throw InvalidArgument("SimilarityMatrix: not symmetric");
      }
    }
  }
}

SimilarityMatrix similarity_matrix(const EmbeddingBatch& batch) {
  return SimilarityMatrix(matmul_transposed(batch.embeddings(), batch.embeddings()));
}

double match_prob_pos(const SimilarityMatrix& sim, std::span<const Label> labels, std::size_t anchor,
                      std::size_t positive, double s) {
  check_scale(s);
  check_labels(sim.values(), labels);
  if (anchor >= labels.size() || positive >= labels.size()) {
    throw InvalidArgument("match_prob_pos: index out of range");
  }
  if (anchor == positive || labels[anchor] != labels[positive]) {
    throw InvalidArgument("match_prob_pos: row " + std::to_string(positive) +
                          " is not a positive of anchor " + std::to_string(anchor));
  }
  const double log_neg = log_negative_mass(sim.values(), labels, anchor, s);
  return sigmoid(s * sim(anchor, positive) - log_neg);
}

double match_prob_neg(const SimilarityMatrix& sim, std::span<const Label> labels, std::size_t anchor,
                      std::size_t positive, std::size_t negative, double s) {
  check_scale(s);
  check_labels(sim.values(), labels);
  if (anchor >= labels.size() || positive >= labels.size() || negative >= labels.size()) {
    throw InvalidArgument("match_prob_neg: index out of range");
  }
  if (anchor == positive || labels[anchor] != labels[positive]) {
    throw InvalidArgument("match_prob_neg: row " + std::to_string(positive) +
                          " is not a positive of anchor " + std::to_string(anchor));
  }
  if (labels[negative] == labels[anchor]) {
    throw InvalidArgument("match_prob_neg: row " + std::to_string(negative) +
                          " is not a negative of anchor " + std::to_string(anchor));
  }
  const double log_neg = log_negative_mass(sim.values(), labels, anchor, s);
  const double x_pos = s * sim(anchor, positive);
  // log of the shared denominator: logaddexp(x_pos, log_neg).
  const double log_denom = log_neg + softplus(x_pos - log_neg);
  return std::exp(s * sim(anchor, negative) - log_denom);
}

double ice_loss(const EmbeddingBatch& batch, double s) {
  check_scale(s);
  const Mat64 sim = matmul_transposed(batch.embeddings(), batch.embeddings());
  return loss_over_anchors(sim, batch.labels(), s);
}

namespace unchecked {

double ice_loss(const Mat64& rows, std::span<const Label> labels, double s) {
  check_scale(s);
  const Mat64 sim = matmul_transposed(rows, rows);
  check_labels(sim, labels);
  return loss_over_anchors(sim, labels, s);
}

}  // namespace unchecked

IceWeights raw_weights(const SimilarityMatrix& sim, std::span<const Label> labels) {
  check_labels(sim.values(), labels);
  return weights_at(sim.values(), labels, 1.0, WeightStage::raw);
}

IceWeights scaled_weights(const SimilarityMatrix& sim, std::span<const Label> labels, double s) {
  check_scale(s);
  check_labels(sim.values(), labels);
  return weights_at(sim.values(), labels, s, WeightStage::scaled);
}

IceWeights normalized_weights(const IceWeights& scaled, std::size_t batch_size) {
  if (scaled.stage != WeightStage::scaled) {
    throw InvalidArgument("normalized_weights: expects scaled weights");
  }
  const std::size_t n = scaled.pos.rows();
  if (n != batch_size || scaled.pos.cols() != n || scaled.neg.rows() != n ||
      scaled.neg.cols() != n) {
    throw InvalidArgument("normalized_weights: weight tables do not match batch size");
  }
  for (double w : scaled.pos.values()) {
    if (w < 0.0) throw InvalidArgument("normalized_weights: negative weight");
  }
  for (double w : scaled.neg.values()) {
    if (w < 0.0) throw InvalidArgument("normalized_weights: negative weight");
  }
  IceWeights out = scaled;
  out.stage = WeightStage::normalized;
  for (std::size_t a = 0; a < n; ++a) normalize_anchor_row(out.pos.row(a), out.neg.row(a), n, a);
  return out;
}

LossAndGradients ice_loss_and_gradients(const EmbeddingBatch& batch, double s, GradMode mode,
                                        ReweightOptions options) {
  check_scale(s);
  const Mat64& f = batch.embeddings();
  const std::span<const Label> labels = batch.labels();
  const std::size_t n = batch.size();
  const Mat64 sim = matmul_transposed(f, f);

  LossAndGradients out{0.0, {Mat64(n, batch.dim()), mode}};
  Mat64& grads = out.gradients.grads;
  Vec64 pos_row(n);
  Vec64 neg_row(n);

  for (std::size_t a = 0; a < n; ++a) {
    out.loss += anchor_terms(sim, labels, a, s, pos_row, neg_row);

    if (mode == GradMode::exact) {
      // dL/dsim(a,i) = -s (1 - p_i), dL/dsim(a,j) = s sum_i p(j|a,i);
      // sim(a,k) = f_a . f_k feeds both rows.
      for (std::size_t k = 0; k < n; ++k) {
        const double coeff = s * (neg_row[k] - pos_row[k]);
        if (coeff == 0.0) continue;
        add_scaled(grads.row(k), coeff, f.row(a));
        add_scaled(grads.row(a), coeff, f.row(k));
      }
    } else {
      normalize_anchor_row(pos_row, neg_row, n, a);
      for (std::size_t k = 0; k < n; ++k) {
        const double coeff = neg_row[k] - pos_row[k];
        if (coeff == 0.0) continue;
        add_scaled(grads.row(k), coeff, f.row(a));
        if (options.anchor_grad) add_scaled(grads.row(a), coeff, f.row(k));
      }
    }
  }
  return out;
}

IceGradients ice_gradients_exact(const EmbeddingBatch& batch, double s) {
  return ice_loss_and_gradients(batch, s, GradMode::exact).gradients;
}

IceGradients ice_gradients_reweighted(const EmbeddingBatch& batch, double s,
                                      ReweightOptions options) {
  return ice_loss_and_gradients(batch, s, GradMode::reweighted, options).gradients;
}

Vec64 reweighted_pair_contribution(const EmbeddingBatch& batch, const IceWeights& normalized,
                                   std::size_t anchor, std::size_t other) {
  if (normalized.stage != WeightStage::normalized) {
    throw InvalidArgument("reweighted_pair_contribution: expects normalized weights");
  }
  if (anchor >= batch.size() || other >= batch.size() || normalized.pos.rows() != batch.size()) {
    throw InvalidArgument("reweighted_pair_contribution: index or size mismatch");
  }
  const double coeff = normalized.neg(anchor, other) - normalized.pos(anchor, other);
  const auto fa = batch.embeddings().row(anchor);
  Vec64 out(fa.size());
  for (std::size_t t = 0; t < fa.size(); ++t) out[t] = coeff * fa[t];
  return out;
}

}  // namespace ice

#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "ice/rng.hpp"
#include "ice/tensor.hpp"

namespace ice {

struct MlpShape {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t embed_dim = 0;

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

// y = x W + b, W stored in_dim x out_dim.
struct DenseLayer {
  Mat64 weights;
  Vec64 bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Parameters of the two-layer embedder, also used for gradients and momentum
// buffers. Declaration order (hidden.weights, hidden.bias, output.weights,
// output.bias) is the canonical flat order.
struct MlpParameters {
  DenseLayer hidden;
  DenseLayer output;

  static MlpParameters zeros(const MlpShape& shape);

  MlpShape shape() const noexcept;
  std::size_t count() const noexcept;
  std::array<std::span<double>, 4> blocks() noexcept;
  std::array<std::span<const double>, 4> blocks() const noexcept;

  friend bool operator==(const MlpParameters&, const MlpParameters&) = default;
};

using MlpGradients = MlpParameters;

// x -> normalize(relu(x W1 + b1) W2 + b2).
class MlpEmbedder {
 public:
  // Throws InvalidArgument unless all dims are >= 1 and embed_dim >= 2.
  explicit MlpEmbedder(MlpShape shape);
  explicit MlpEmbedder(MlpParameters params);

  // He initialization: weights ~ N(0, 2/fan_in), biases zero.
  static MlpEmbedder he_initialized(MlpShape shape, Rng& rng);

  const MlpShape& shape() const noexcept { return shape_; }
  MlpParameters& params() noexcept { return params_; }
  const MlpParameters& params() const noexcept { return params_; }

 private:
  MlpShape shape_;
  MlpParameters params_;
};

struct ForwardCache {
  Mat64 inputs;
  Mat64 hidden_pre;   // before relu
  Mat64 hidden_act;   // after relu
  Mat64 projected;    // before normalization
};

struct ForwardResult {
  Mat64 embeddings;
  ForwardCache cache;
};

// Throws InvalidArgument on input width mismatch and DegenerateInput if a
// projected row has norm <= kNormEpsilon.
ForwardResult forward(const MlpEmbedder& net, const Mat64& inputs);

Mat64 embed(const MlpEmbedder& net, const Mat64& inputs);

MlpGradients backward(const MlpEmbedder& net, const ForwardCache& cache,
                      const Mat64& embedding_grads);

struct SgdConfig {
  double learning_rate = 1e-3;
  double momentum = 0.8;
  double weight_decay = 1e-5;
  double last_layer_lr_multiplier = 10.0;
};

class SgdState {
 public:
  // Throws InvalidArgument if lr <= 0, momentum outside [0, 1),
  // weight_decay < 0 or multiplier <= 0.
  SgdState(SgdConfig config, const MlpShape& shape);

  const SgdConfig& config() const noexcept { return config_; }
  MlpParameters& velocity() noexcept { return velocity_; }
  const MlpParameters& velocity() const noexcept { return velocity_; }

 private:
  SgdConfig config_;
  MlpParameters velocity_;
};

// v <- momentum v + g + weight_decay p;  p <- p - lr_eff v.
// lr_eff is learning_rate * last_layer_lr_multiplier for the output layer.
void sgd_step(MlpEmbedder& net, const MlpGradients& grads, SgdState& state);

}  // namespace ice

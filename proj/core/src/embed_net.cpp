#include "ice/embed_net.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ice/error.hpp"

namespace ice {
namespace {

DenseLayer zero_layer(std::size_t in, std::size_t out) { return {Mat64(in, out), Vec64(out, 0.0)}; }

// out = x W + b
Mat64 affine(const Mat64& x, const DenseLayer& layer) {
  const Mat64& w = layer.weights;
  Mat64 out(x.rows(), w.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(layer.bias.begin(), layer.bias.end(), dst.begin());
    const auto src = x.row(r);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      const double xi = src[i];
      const auto wi = w.row(i);
      for (std::size_t o = 0; o < w.cols(); ++o) dst[o] += xi * wi[o];
    }
  }
  return out;
}

// Accumulates dW = x^T g, db = sum_r g_r and returns dx = g W^T.
Mat64 affine_backward(const Mat64& x, const Mat64& g, const DenseLayer& layer, DenseLayer& grad) {
  const Mat64& w = layer.weights;
  Mat64 dx(x.rows(), w.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    const auto gr = g.row(r);
    auto dxr = dx.row(r);
    for (std::size_t o = 0; o < w.cols(); ++o) grad.bias[o] += gr[o];
    for (std::size_t i = 0; i < w.rows(); ++i) {
      const auto wi = w.row(i);
      auto dwi = grad.weights.row(i);
      double acc = 0.0;
      for (std::size_t o = 0; o < w.cols(); ++o) {
        dwi[o] += xr[i] * gr[o];
        acc += gr[o] * wi[o];
      }
      dxr[i] = acc;
    }
  }
  return dx;
}

void check_shape(const MlpShape& shape) {
  if (shape.in_dim == 0 || shape.hidden_dim == 0) {
    throw InvalidArgument("MlpEmbedder: dimensions must be positive");
  }
  if (shape.embed_dim < 2) throw InvalidArgument("MlpEmbedder: embed_dim must be >= 2");
}

}  // namespace

MlpParameters MlpParameters::zeros(const MlpShape& shape) {
  return {zero_layer(shape.in_dim, shape.hidden_dim), zero_layer(shape.hidden_dim, shape.embed_dim)};
}

MlpShape MlpParameters::shape() const noexcept {
  return {hidden.weights.rows(), hidden.weights.cols(), output.weights.cols()};
}

std::size_t MlpParameters::count() const noexcept {
  return hidden.weights.size() + hidden.bias.size() + output.weights.size() + output.bias.size();
}

std::array<std::span<double>, 4> MlpParameters::blocks() noexcept {
  return {hidden.weights.values(), std::span<double>(hidden.bias), output.weights.values(),
          std::span<double>(output.bias)};
}

std::array<std::span<const double>, 4> MlpParameters::blocks() const noexcept {
  return {hidden.weights.values(), std::span<const double>(hidden.bias), output.weights.values(),
          std::span<const double>(output.bias)};
}

MlpEmbedder::MlpEmbedder(MlpShape shape) : shape_(shape) {
  check_shape(shape_);
  params_ = MlpParameters::zeros(shape_);
}

MlpEmbedder::MlpEmbedder(MlpParameters params) : params_(std::move(params)) {
  shape_ = params_.shape();
  check_shape(shape_);
  if (params_.hidden.bias.size() != shape_.hidden_dim ||
      params_.output.weights.rows() != shape_.hidden_dim ||
      params_.output.bias.size() != shape_.embed_dim) {
    throw InvalidArgument("MlpEmbedder: inconsistent layer shapes");
  }
  for (const auto block : params_.blocks()) {
    for (double v : block) {
      if (!std::isfinite(v)) throw InvalidArgument("MlpEmbedder: non-finite parameter");
    }
  }
}

MlpEmbedder MlpEmbedder::he_initialized(MlpShape shape, Rng& rng) {
  MlpEmbedder net(shape);
  const double std1 = std::sqrt(2.0 / static_cast<double>(shape.in_dim));
  const double std2 = std::sqrt(2.0 / static_cast<double>(shape.hidden_dim));
  for (double& w : net.params_.hidden.weights.values()) w = std1 * rng.normal();
  for (double& w : net.params_.output.weights.values()) w = std2 * rng.normal();
  return net;
}

ForwardResult forward(const MlpEmbedder& net, const Mat64& inputs) {
  if (inputs.cols() != net.shape().in_dim) {
    throw InvalidArgument("forward: input width " + std::to_string(inputs.cols()) +
                          " does not match in_dim " + std::to_string(net.shape().in_dim));
  }
  ForwardResult out;
  out.cache.inputs = inputs;
  out.cache.hidden_pre = affine(inputs, net.params().hidden);
  out.cache.hidden_act = out.cache.hidden_pre;
  for (double& v : out.cache.hidden_act.values()) v = std::max(v, 0.0);
  out.cache.projected = affine(out.cache.hidden_act, net.params().output);
  out.embeddings = out.cache.projected;
  for (std::size_t r = 0; r < out.embeddings.rows(); ++r) {
    const NormalizeResult unit = l2_normalize_forward(out.cache.projected.row(r));
    std::copy(unit.unit.begin(), unit.unit.end(), out.embeddings.row(r).begin());
  }
  return out;
}

Mat64 embed(const MlpEmbedder& net, const Mat64& inputs) {
  return std::move(forward(net, inputs).embeddings);
}

MlpGradients backward(const MlpEmbedder& net, const ForwardCache& cache,
                      const Mat64& embedding_grads) {
  const MlpShape& shape = net.shape();
  if (embedding_grads.rows() != cache.projected.rows() || embedding_grads.cols() != shape.embed_dim ||
      cache.inputs.cols() != shape.in_dim || cache.hidden_act.cols() != shape.hidden_dim) {
    throw InvalidArgument("backward: gradient or cache shape does not match the network");
  }
  MlpGradients grads = MlpParameters::zeros(shape);

  Mat64 d_projected(embedding_grads.rows(), shape.embed_dim);
  for (std::size_t r = 0; r < embedding_grads.rows(); ++r) {
    const Vec64 g = l2_normalize_backward(cache.projected.row(r), embedding_grads.row(r));
    std::copy(g.begin(), g.end(), d_projected.row(r).begin());
  }
  Mat64 d_hidden = affine_backward(cache.hidden_act, d_projected, net.params().output, grads.output);
  // relu'(0) = 0
  for (std::size_t k = 0; k < d_hidden.size(); ++k) {
    if (!(cache.hidden_pre.values()[k] > 0.0)) d_hidden.values()[k] = 0.0;
  }
  affine_backward(cache.inputs, d_hidden, net.params().hidden, grads.hidden);
  return grads;
}

SgdState::SgdState(SgdConfig config, const MlpShape& shape)
    : config_(config), velocity_(MlpParameters::zeros(shape)) {
  if (!(config_.learning_rate > 0.0)) throw InvalidArgument("sgd: learning_rate must be > 0");
  if (!(config_.momentum >= 0.0 && config_.momentum < 1.0)) {
    throw InvalidArgument("sgd: momentum must be in [0, 1)");
  }
  if (!(config_.weight_decay >= 0.0)) throw InvalidArgument("sgd: weight_decay must be >= 0");
  if (!(config_.last_layer_lr_multiplier > 0.0)) {
    throw InvalidArgument("sgd: last_layer_lr_multiplier must be > 0");
  }
}

void sgd_step(MlpEmbedder& net, const MlpGradients& grads, SgdState& state) {
  if (grads.shape() != net.shape() || state.velocity().shape() != net.shape()) {
    throw InvalidArgument("sgd_step: gradient shape does not match the network");
  }
  const SgdConfig& cfg = state.config();
  auto params = net.params().blocks();
  const auto g = grads.blocks();
  auto vel = state.velocity().blocks();
  for (std::size_t b = 0; b < params.size(); ++b) {
    // blocks 2 and 3 are the output layer
    const double lr = b >= 2 ? cfg.learning_rate * cfg.last_layer_lr_multiplier : cfg.learning_rate;
    for (std::size_t k = 0; k < params[b].size(); ++k) {
      vel[b][k] = cfg.momentum * vel[b][k] + g[b][k] + cfg.weight_decay * params[b][k];
      params[b][k] -= lr * vel[b][k];
    }
  }
}

}  // namespace ice

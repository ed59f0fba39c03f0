#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "ice/embed_net.hpp"
#include "ice/ice_loss.hpp"
#include "ice/retrieval.hpp"
#include "ice/rng.hpp"

namespace {

using namespace ice;

Mat64 random_unit_rows(Rng& rng, std::size_t n, std::size_t d) {
  Mat64 m(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 0.0;
    for (double& v : m.row(r)) {
      v = rng.normal();
      sq += v * v;
    }
    for (double& v : m.row(r)) v /= std::sqrt(sq);
  }
  return m;
}

std::vector<Label> grouped_labels(std::size_t classes, std::size_t per_class) {
  std::vector<Label> labels;
  for (std::size_t r = 0; r < classes * per_class; ++r) labels.push_back(static_cast<Label>(r / per_class));
  return labels;
}

void BM_IceLossAndGradients(benchmark::State& state) {
  const auto classes = static_cast<std::size_t>(state.range(0));
  const GradMode mode = state.range(1) == 0 ? GradMode::exact : GradMode::reweighted;
  Rng rng(1);
  const EmbeddingBatch batch(random_unit_rows(rng, classes * 4, 64), grouped_labels(classes, 4));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ice_loss_and_gradients(batch, 64.0, mode));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
  state.SetLabel(mode == GradMode::exact ? "exact" : "reweighted");
}
BENCHMARK(BM_IceLossAndGradients)->ArgsProduct({{5, 15, 45}, {0, 1}});

void BM_RecallAtK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Mat64 e = random_unit_rows(rng, n, 16);
  const std::vector<Label> labels = grouped_labels(n / 10, 10);
  const std::vector<std::size_t> ks{1, 2, 4, 8};
  for (auto _ : state) {
    benchmark::DoNotOptimize(recall_at_k(e, labels, ks));
  }
}
BENCHMARK(BM_RecallAtK)->Arg(100)->Arg(400)->Arg(1600);

void BM_MlpForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const MlpEmbedder net = MlpEmbedder::he_initialized({20, 32, 8}, rng);
  Mat64 inputs(n, 20);
  for (double& v : inputs.values()) v = rng.normal();
  const Mat64 upstream = random_unit_rows(rng, n, 8);
  for (auto _ : state) {
    const ForwardResult fwd = forward(net, inputs);
    benchmark::DoNotOptimize(backward(net, fwd.cache, upstream));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_MlpForwardBackward)->Arg(20)->Arg(180);

}  // namespace

BENCHMARK_MAIN();

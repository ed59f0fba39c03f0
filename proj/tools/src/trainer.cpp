#include "ice_app/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "ice/error.hpp"
#include "ice/ice_loss.hpp"
#include "ice/rng.hpp"
#include "ice/sampler.hpp"

namespace ice::app {
namespace {

// Independent RNG streams derived from the user seed.
enum Stream : std::uint64_t { kClusterMeans = 0, kClusterPoints = 1, kInit = 2, kBatches = 3, kMonitor = 4 };

EmbeddingBatch embed_batch(const MlpEmbedder& net, const LabeledDataset& ds, const SampledBatch& b) {
  return EmbeddingBatch(embed(net, ds.gather(b.indices)), b.labels);
}

}  // namespace

Splits synthetic_splits(const ClusterSpec& clusters, std::uint64_t seed, bool disjoint_classes) {
  const std::uint64_t test_seed = seed + 1;
  return {generate_clusters(clusters, derive_seed(seed, kClusterMeans), derive_seed(seed, kClusterPoints)),
          generate_clusters(clusters, derive_seed(disjoint_classes ? test_seed : seed, kClusterMeans),
                            derive_seed(test_seed, kClusterPoints))};
}

Splits load_splits(const RunConfig& config) {
  if (config.data.empty()) {
    return synthetic_splits(config.clusters, config.seed, config.disjoint_classes);
  }
  LabeledDataset train = read_dataset_csv(config.data);
  if (config.eval_data.empty()) return {train, train};
  LabeledDataset held_out = read_dataset_csv(config.eval_data);
  if (held_out.dim() != train.dim()) {
    throw InvalidArgument("eval-data has " + std::to_string(held_out.dim()) +
                          " features but data has " + std::to_string(train.dim()));
  }
  return {std::move(train), std::move(held_out)};
}

MlpEmbedder initial_network(const RunConfig& config, std::size_t input_dim) {
  Rng rng(derive_seed(config.seed, kInit));
  return MlpEmbedder::he_initialized({input_dim, config.hidden_dim, config.embed_dim}, rng);
}

double held_out_recall(const MlpEmbedder& net, const LabeledDataset& ds, std::size_t k) {
  const std::size_t ks[] = {k};
  return recall_at_k(embed(net, ds.features()), ds.labels(), ks).recall_at_k.front();
}

TrainResult train_ice(const RunConfig& config, const Splits& splits) {
  validate(config);
  const LabeledDataset& train = splits.train;
  BatchSpec spec = config.batch_spec();
  spec.seed = derive_seed(config.seed, kBatches);
  BatchSampler sampler(train, spec);

  Rng monitor_rng(derive_seed(config.seed, kMonitor));
  const SampledBatch monitor = sample_batch(train, spec, monitor_rng);

  TrainResult result{initial_network(config, train.dim()), {}};
  MlpEmbedder& net = result.net;
  SgdState sgd(config.sgd, net.shape());

  auto log_row = [&](std::uint64_t iter) {
    const double loss = ice_loss(embed_batch(net, train, monitor), config.scale_s);
    if (!std::isfinite(loss)) {
      throw DegenerateInput("non-finite loss at iteration " + std::to_string(iter));
    }
    result.metrics.push_back({iter, loss, held_out_recall(net, splits.held_out, 1)});
  };

  const std::uint64_t every = config.eval_every();
  for (std::uint64_t iter = 0; iter < config.iters; ++iter) {
    if (iter % every == 0) log_row(iter);

    const SampledBatch picked = sampler.next();
    ForwardResult fwd = forward(net, train.gather(picked.indices));
    const EmbeddingBatch batch(std::move(fwd.embeddings), picked.labels);
    const LossAndGradients lg =
        ice_loss_and_gradients(batch, config.scale_s, config.grad_mode, config.reweight_options());
    if (!std::isfinite(lg.loss) || !lg.gradients.grads.all_finite()) {
      throw DegenerateInput("non-finite loss or gradient at iteration " + std::to_string(iter));
    }
    sgd_step(net, backward(net, fwd.cache, lg.gradients.grads), sgd);
  }
  if (result.metrics.empty() || result.metrics.back().iter != config.iters) log_row(config.iters);
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "iter,loss,recall_at_1\n";
  char buf[96];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.6f\n", static_cast<unsigned long long>(r.iter),
                  r.loss, r.recall_at_1);
    out << buf;
  }
}

}  // namespace ice::app

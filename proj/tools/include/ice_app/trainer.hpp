#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ice/dataset.hpp"
#include "ice/embed_net.hpp"
#include "ice/retrieval.hpp"
#include "ice_app/run_config.hpp"

namespace ice::app {

struct MetricsRow {
  std::uint64_t iter = 0;
  double loss = 0.0;          // ice_loss on the fixed monitor batch
  double recall_at_1 = 0.0;   // held-out split
};

struct TrainResult {
  MlpEmbedder net;
  std::vector<MetricsRow> metrics;
};

struct Splits {
  LabeledDataset train;
  LabeledDataset held_out;
};

// Training split from `seed`; held-out split from `seed + 1`, sharing the
// class means unless disjoint_classes is set.
Splits synthetic_splits(const ClusterSpec& clusters, std::uint64_t seed, bool disjoint_classes);

// Loads config.data / config.eval_data, or generates synthetic splits.
Splits load_splits(const RunConfig& config);

MlpEmbedder initial_network(const RunConfig& config, std::size_t input_dim);

// Runs `iters` iterations of: sample batch, forward, ICE loss and gradients,
// backward, SGD step. Metric rows are logged at iteration 0, every
// eval_every() iterations and at the last iteration; the loss column is
// measured on one monitor batch drawn at the start.
//
// Throws DegenerateInput on a non-finite loss or a degenerate embedding.
TrainResult train_ice(const RunConfig& config, const Splits& splits);

double held_out_recall(const MlpEmbedder& net, const LabeledDataset& ds, std::size_t k);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

}  // namespace ice::app

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ice/dataset.hpp"
#include "ice/rng.hpp"

namespace ice {

struct BatchSpec {
  std::size_t classes_per_batch = 2;
  std::size_t samples_per_class = 2;
  std::uint64_t seed = 0;
};

// Throws InvalidArgument if C < 2, N_c < 2 or C exceeds the class count.
void validate(const BatchSpec& spec, const LabeledDataset& ds);

struct SampledBatch {
  std::vector<std::size_t> indices;    // rows of the dataset, grouped by class
  std::vector<Label> labels;           // relabeled to 0..C-1 in draw order
  std::vector<Label> source_classes;   // original class of each relabeled id
};

// Draws C distinct classes uniformly without replacement, then N_c members
// of each: without replacement when the class is large enough, with
// replacement otherwise.
SampledBatch sample_batch(const LabeledDataset& ds, const BatchSpec& spec, Rng& rng);

// Owns an Rng seeded from spec.seed.
class BatchSampler {
 public:
  BatchSampler(const LabeledDataset& ds, BatchSpec spec);
  SampledBatch next();

 private:
  const LabeledDataset* ds_;
  BatchSpec spec_;
  Rng rng_;
};

}  // namespace ice

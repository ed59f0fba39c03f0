#include "ice/sampler.hpp"

#include <numeric>
#include <string>

#include "ice/error.hpp"

namespace ice {
namespace {

// First `count` entries of `pool` become a uniform draw without replacement.
void partial_shuffle(std::vector<std::size_t>& pool, std::size_t count, Rng& rng) {
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.uniform_index(pool.size() - k));
    std::swap(pool[k], pool[pick]);
  }
}

}  // namespace

void validate(const BatchSpec& spec, const LabeledDataset& ds) {
  if (spec.classes_per_batch < 2) throw InvalidArgument("batch spec: need at least 2 classes per batch");
  if (spec.samples_per_class < 2) {
    throw InvalidArgument("batch spec: need at least 2 samples per class");
  }
  if (spec.classes_per_batch > ds.num_classes()) {
    throw InvalidArgument("batch spec: " + std::to_string(spec.classes_per_batch) +
                          " classes per batch but the dataset has " +
                          std::to_string(ds.num_classes()));
  }
}

SampledBatch sample_batch(const LabeledDataset& ds, const BatchSpec& spec, Rng& rng) {
  validate(spec, ds);
  const std::size_t c_count = spec.classes_per_batch;
  const std::size_t per_class = spec.samples_per_class;

  std::vector<std::size_t> classes(ds.num_classes());
  std::iota(classes.begin(), classes.end(), std::size_t{0});
  partial_shuffle(classes, c_count, rng);

  SampledBatch out;
  out.indices.reserve(c_count * per_class);
  out.labels.reserve(c_count * per_class);
  for (std::size_t slot = 0; slot < c_count; ++slot) {
    const auto members = ds.members(static_cast<Label>(classes[slot]));
    out.source_classes.push_back(static_cast<Label>(classes[slot]));
    if (members.size() >= per_class) {
      std::vector<std::size_t> pool(members.begin(), members.end());
      partial_shuffle(pool, per_class, rng);
      out.indices.insert(out.indices.end(), pool.begin(), pool.begin() + per_class);
    } else {
      for (std::size_t k = 0; k < per_class; ++k) {
        out.indices.push_back(members[static_cast<std::size_t>(rng.uniform_index(members.size()))]);
      }
    }
    out.labels.insert(out.labels.end(), per_class, static_cast<Label>(slot));
  }
  return out;
}

BatchSampler::BatchSampler(const LabeledDataset& ds, BatchSpec spec)
    : ds_(&ds), spec_(spec), rng_(spec.seed) {
  validate(spec_, *ds_);
}

SampledBatch BatchSampler::next() { return sample_batch(*ds_, spec_, rng_); }

}  // namespace ice

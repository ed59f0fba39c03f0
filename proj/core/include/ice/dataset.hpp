#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ice/ice_loss.hpp"
#include "ice/tensor.hpp"

namespace ice {

// Feature rows with class labels 0..T-1, every class non-empty.
class LabeledDataset {
 public:
  LabeledDataset(Mat64 features, std::vector<Label> labels);

  const Mat64& features() const noexcept { return features_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  std::span<const std::size_t> members(Label c) const noexcept {
    return class_index_[static_cast<std::size_t>(c)];
  }
  std::size_t num_classes() const noexcept { return class_index_.size(); }
  std::size_t size() const noexcept { return features_.rows(); }
  std::size_t dim() const noexcept { return features_.cols(); }

  // Rows of `indices`, in that order.
  Mat64 gather(std::span<const std::size_t> indices) const;

 private:
  Mat64 features_;
  std::vector<Label> labels_;
  std::vector<std::vector<std::size_t>> class_index_;
};

// CSV with header `label,f0,f1,...`; features printed with 17 significant
// digits so doubles round-trip exactly.
void write_dataset_csv(std::ostream& out, const LabeledDataset& ds);
void write_dataset_csv(const std::filesystem::path& path, const LabeledDataset& ds);
LabeledDataset read_dataset_csv(std::istream& in);
LabeledDataset read_dataset_csv(const std::filesystem::path& path);

struct ClusterSpec {
  std::size_t num_classes = 10;
  std::size_t per_class = 40;
  std::size_t input_dim = 20;
  double cluster_std = 0.15;
};

// One isotropic Gaussian cluster per class. Class means are random unit
// vectors drawn from `mean_seed`; points are drawn from `point_seed`. Rows
// are grouped by class.
LabeledDataset generate_clusters(const ClusterSpec& spec, std::uint64_t mean_seed,
                                 std::uint64_t point_seed);

}  // namespace ice

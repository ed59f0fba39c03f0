#include "ice/dataset.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>

#include "ice/error.hpp"
#include "ice/rng.hpp"

namespace ice {

LabeledDataset::LabeledDataset(Mat64 features, std::vector<Label> labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.empty()) throw InvalidArgument("LabeledDataset: no rows");
  if (labels_.size() != features_.rows()) {
    throw InvalidArgument("LabeledDataset: label count does not match row count");
  }
  Label max_label = -1;
  for (Label y : labels_) {
    if (y < 0) throw InvalidArgument("LabeledDataset: negative label");
    max_label = std::max(max_label, y);
  }
  class_index_.resize(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    class_index_[static_cast<std::size_t>(labels_[r])].push_back(r);
  }
  for (std::size_t c = 0; c < class_index_.size(); ++c) {
    if (class_index_[c].empty()) {
      throw InvalidArgument("LabeledDataset: labels must be contiguous from 0; class " +
                            std::to_string(c) + " is empty");
    }
  }
}

Mat64 LabeledDataset::gather(std::span<const std::size_t> indices) const {
  Mat64 out(indices.size(), features_.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= features_.rows()) throw InvalidArgument("LabeledDataset::gather: bad index");
    const auto src = features_.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& ds) {
  out << "label";
  for (std::size_t t = 0; t < ds.dim(); ++t) out << ",f" << t;
  out << '\n';
  std::array<char, 64> buf{};
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out << ds.labels()[r];
    for (double v : ds.features().row(r)) {
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                     std::chars_format::general, 17);
      out << ',' << std::string_view(buf.data(), static_cast<std::size_t>(res.ptr - buf.data()));
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const LabeledDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  write_dataset_csv(out, ds);
  if (!out) throw IoError("failed writing dataset " + path.string());
}

LabeledDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("dataset: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("label,", 0) != 0) throw InvalidArgument("dataset: header must start with 'label,'");
  std::size_t dim = 0;
  for (char ch : line) dim += ch == ',' ? 1 : 0;

  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    Label y = 0;
    auto res = std::from_chars(p, end, y);
    if (res.ec != std::errc() || y < 0) {
      throw InvalidArgument("dataset line " + std::to_string(line_no) + ": bad label");
    }
    p = res.ptr;
    for (std::size_t t = 0; t < dim; ++t) {
      if (p == end || *p != ',') {
        throw InvalidArgument("dataset line " + std::to_string(line_no) + ": expected " +
                              std::to_string(dim) + " features");
      }
      double v = 0.0;
      res = std::from_chars(p + 1, end, v);
      if (res.ec != std::errc() || !std::isfinite(v)) {
        throw InvalidArgument("dataset line " + std::to_string(line_no) + ": bad feature value");
      }
      values.push_back(v);
      p = res.ptr;
    }
    if (p != end) {
      throw InvalidArgument("dataset line " + std::to_string(line_no) + ": trailing data");
    }
    labels.push_back(y);
  }
  if (labels.empty()) throw InvalidArgument("dataset: no rows");
  Mat64 features(labels.size(), dim, std::move(values));
  return LabeledDataset(std::move(features), std::move(labels));
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset " + path.string());
  return read_dataset_csv(in);
}

LabeledDataset generate_clusters(const ClusterSpec& spec, std::uint64_t mean_seed,
                                 std::uint64_t point_seed) {
  if (spec.num_classes == 0 || spec.per_class == 0 || spec.input_dim == 0) {
    throw InvalidArgument("generate_clusters: counts and dimension must be positive");
  }
  if (!(spec.cluster_std >= 0.0) || !std::isfinite(spec.cluster_std)) {
    throw InvalidArgument("generate_clusters: cluster_std must be finite and >= 0");
  }
  Rng mean_rng(mean_seed);
  Mat64 means(spec.num_classes, spec.input_dim);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    auto row = means.row(c);
    for (double& v : row) v = mean_rng.normal();
    const Vec64 unit = l2_normalize_forward(row).unit;
    std::copy(unit.begin(), unit.end(), row.begin());
  }

  Rng point_rng(point_seed);
  const std::size_t rows = spec.num_classes * spec.per_class;
  Mat64 features(rows, spec.input_dim);
  std::vector<Label> labels(rows);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t k = 0; k < spec.per_class; ++k) {
      const std::size_t r = c * spec.per_class + k;
      labels[r] = static_cast<Label>(c);
      auto dst = features.row(r);
      const auto mean = means.row(c);
      for (std::size_t t = 0; t < spec.input_dim; ++t) {
        dst[t] = mean[t] + spec.cluster_std * point_rng.normal();
      }
    }
  }
  return LabeledDataset(std::move(features), std::move(labels));
}

}  // namespace ice

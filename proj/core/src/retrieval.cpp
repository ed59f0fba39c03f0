#include "ice/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>

#include "ice/error.hpp"

namespace ice {
namespace {

void check_inputs(const Mat64& embeddings, std::span<const Label> labels,
                  std::span<const std::size_t> k_values) {
  const std::size_t n = embeddings.rows();
  if (labels.size() != n) throw InvalidArgument("recall_at_k: label count does not match rows");
  if (k_values.empty()) throw InvalidArgument("recall_at_k: no K values");
  for (std::size_t k : k_values) {
    if (k == 0 || k >= n) {
      throw InvalidArgument("recall_at_k: K=" + std::to_string(k) + " must be in [1, " +
                            std::to_string(n) + ")");
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = embeddings.row(r);
    if (std::abs(dot(row, row) - 1.0) > 1e-9) {
      throw InvalidArgument("recall_at_k: row " + std::to_string(r) + " is not unit norm");
    }
  }
  std::vector<Label> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i < 2) {
      throw InvalidArgument("recall_at_k: label " + std::to_string(sorted[i]) +
                            " occurs once; its query can never score");
    }
    i = j;
  }
}

}  // namespace

RetrievalReport recall_at_k(const Mat64& embeddings, std::span<const Label> labels,
                            std::span<const std::size_t> k_values) {
  check_inputs(embeddings, labels, k_values);
  const std::size_t n = embeddings.rows();

  RetrievalReport report{{k_values.begin(), k_values.end()}, std::vector<double>(k_values.size()), n};
  std::vector<std::size_t> hits(k_values.size(), 0);
  Vec64 sims(n);
  for (std::size_t q = 0; q < n; ++q) {
    const auto fq = embeddings.row(q);
    for (std::size_t j = 0; j < n; ++j) sims[j] = dot(fq, embeddings.row(j));

    // Highest-ranked same-label neighbour; its rank decides every K at once.
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q || labels[j] != labels[q]) continue;
      if (best == n || sims[j] > sims[best]) best = j;
    }
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q || j == best) continue;
      if (sims[j] > sims[best] || (sims[j] == sims[best] && j < best)) ++ahead;
    }
    for (std::size_t k = 0; k < k_values.size(); ++k) {
      if (ahead < k_values[k]) ++hits[k];
    }
  }
  for (std::size_t k = 0; k < k_values.size(); ++k) {
    report.recall_at_k[k] = static_cast<double>(hits[k]) / static_cast<double>(n);
  }
  return report;
}

void write_recall_csv(std::ostream& out, const RetrievalReport& report) {
  out << "k,recall\n";
  char buf[64];
  for (std::size_t k = 0; k < report.k_values.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", report.k_values[k], report.recall_at_k[k]);
    out << buf;
  }
}

void write_recall_csv(const std::filesystem::path& path, const RetrievalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_recall_csv(out, report);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ice

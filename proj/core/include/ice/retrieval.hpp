#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ice/ice_loss.hpp"
#include "ice/tensor.hpp"

namespace ice {

struct RetrievalReport {
  std::vector<std::size_t> k_values;
  std::vector<double> recall_at_k;
  std::size_t num_queries = 0;
};

// Leave-one-out Recall@K: every row queries all other rows, ranked by
// descending dot product with ties broken by ascending row index. A query
// scores 1 for K if a same-label row is among its top K.
//
// Throws InvalidArgument if a K is 0 or >= N, a label occurs only once, or a
// row is not unit norm (1e-9).
RetrievalReport recall_at_k(const Mat64& embeddings, std::span<const Label> labels,
                            std::span<const std::size_t> k_values);

// `k,recall` header, one row per K, recall with 6 decimals.
void write_recall_csv(std::ostream& out, const RetrievalReport& report);
void write_recall_csv(const std::filesystem::path& path, const RetrievalReport& report);

}  // namespace ice

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "provaudit/metric.hpp"

namespace provaudit {

// Spatial mean of every channel, levels concatenated in order.
struct PooledEmbedding {
  std::vector<float> vector;
  float norm = 0.0f;

  static PooledEmbedding from_vector(std::vector<float> v);
  bool operator==(const PooledEmbedding&) const = default;
};

PooledEmbedding pool_features(const FeatureStack& stack);

// Euclidean distance, accumulated in double in index order.
double embedding_distance(std::span<const float> a, std::span<const float> b);

// Dense row-major table of pooled embeddings keyed by strictly increasing
// entry ids. Row i is node i of any index built over the set.
class EmbeddingSet {
 public:
  explicit EmbeddingSet(std::size_t dim = 0) : dim_(dim) {}

  void add(std::uint64_t entry_id, std::span<const float> vector);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::uint64_t id(std::size_t row) const { return ids_[row]; }
  std::span<const std::uint64_t> ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }

 private:
  std::size_t dim_;
  std::vector<std::uint64_t> ids_;
  std::vector<float> data_;
};

struct Neighbor {
  std::uint64_t entry_id = 0;
  double coarse_distance = 0.0;
  std::optional<double> fine_distance;

  bool operator==(const Neighbor&) const = default;
};

// Orders by coarse distance, then entry id.
bool coarse_less(const Neighbor& a, const Neighbor& b);
// Orders by fine distance, then coarse distance, then entry id.
bool fine_less(const Neighbor& a, const Neighbor& b);

// The k closest rows by coarse distance, ascending, ties to the smaller id.
// k larger than the corpus returns every row. Throws EmptyCorpusError.
std::vector<Neighbor> exact_knn(std::span<const float> query,
                                const EmbeddingSet& corpus, std::size_t k);

class FeatureFile;

// Re-scores the r best candidates (by coarse distance) with lpips_distance
// against the stored stacks and returns them sorted by fine distance.
std::vector<Neighbor> rerank(std::span<const Neighbor> candidates,
                             const FeatureStack& query_stack,
                             const FeatureFile& features,
                             const CalibrationWeights& w, std::size_t r);

}  // namespace provaudit

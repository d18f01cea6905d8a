#include "provaudit/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "provaudit/error.hpp"
#include "provaudit/feature_store.hpp"

namespace provaudit {

PooledEmbedding PooledEmbedding::from_vector(std::vector<float> v) {
  double ss = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw MetricError("embedding has non-finite value");
    ss += static_cast<double>(x) * x;
  }
  PooledEmbedding e;
  e.vector = std::move(v);
  e.norm = static_cast<float>(std::sqrt(ss));
  return e;
}

PooledEmbedding pool_features(const FeatureStack& stack) {
  std::vector<float> out;
  for (const FeatureLevel& level : stack.levels) {
    std::vector<double> sums(level.channels, 0.0);
    for (std::size_t i = 0; i < level.values.size(); ++i) {
      sums[i % level.channels] += level.values[i];
    }
    const double n = static_cast<double>(level.positions());
    for (double s : sums) out.push_back(static_cast<float>(s / n));
  }
  return PooledEmbedding::from_vector(std::move(out));
}

double embedding_distance(std::span<const float> a, std::span<const float> b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

void EmbeddingSet::add(std::uint64_t entry_id, std::span<const float> vector) {
  if (dim_ == 0 && ids_.empty()) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw MetricError("embedding length " + std::to_string(vector.size()) +
                      " does not match set dimension " + std::to_string(dim_));
  }
  if (!ids_.empty() && entry_id <= ids_.back()) {
    throw CorpusIntegrityError("entry ids must be strictly increasing");
  }
  ids_.push_back(entry_id);
  data_.insert(data_.end(), vector.begin(), vector.end());
}

bool coarse_less(const Neighbor& a, const Neighbor& b) {
  if (a.coarse_distance != b.coarse_distance) {
    return a.coarse_distance < b.coarse_distance;
  }
  return a.entry_id < b.entry_id;
}

bool fine_less(const Neighbor& a, const Neighbor& b) {
  const double fa = a.fine_distance.value_or(INFINITY);
  const double fb = b.fine_distance.value_or(INFINITY);
  if (fa != fb) return fa < fb;
  return coarse_less(a, b);
}

std::vector<Neighbor> exact_knn(std::span<const float> query,
                                const EmbeddingSet& corpus, std::size_t k) {
  if (corpus.empty()) throw EmptyCorpusError();
  if (k == 0) throw ConfigError("k must be at least 1");
  if (query.size() != corpus.dim()) {
    throw MetricError("query dimension " + std::to_string(query.size()) +
                      " does not match corpus dimension " +
                      std::to_string(corpus.dim()));
  }
  // Bounded max-heap: the top is the worst of the best k seen so far.
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(&coarse_less)>
      heap(&coarse_less);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Neighbor n{corpus.id(i), embedding_distance(query, corpus.row(i)), {}};
    if (heap.size() < k) {
      heap.push(n);
    } else if (coarse_less(n, heap.top())) {
      heap.pop();
      heap.push(n);
    }
  }
  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top();
    heap.pop();
  }
  return out;
}

std::vector<Neighbor> rerank(std::span<const Neighbor> candidates,
                             const FeatureStack& query_stack,
                             const FeatureFile& features,
                             const CalibrationWeights& w, std::size_t r) {
  if (candidates.empty()) throw ConfigError("rerank needs at least one candidate");
  if (r == 0) throw ConfigError("rerank depth must be at least 1");
  std::vector<Neighbor> pool(candidates.begin(), candidates.end());
  std::sort(pool.begin(), pool.end(), coarse_less);
  if (pool.size() > r) pool.resize(r);
  for (Neighbor& n : pool) {
    const FeatureRecord* rec = features.find(n.entry_id);
    if (rec == nullptr) {
      throw CorpusIntegrityError("no stored features for entry " +
                                 std::to_string(n.entry_id));
    }
    n.fine_distance = lpips_distance(query_stack, rec->stack, w);
  }
  std::sort(pool.begin(), pool.end(), fine_less);
  return pool;
}

}  // namespace provaudit

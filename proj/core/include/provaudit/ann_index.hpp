#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "provaudit/digest.hpp"
#include "provaudit/embedding.hpp"

namespace provaudit {

struct AnnParams {
  std::uint32_t max_degree = 16;
  std::uint32_t ef_construction = 64;
  std::uint64_t seed = 0x5EEDull;

  bool operator==(const AnnParams&) const = default;
};

struct AnnResult {
  std::vector<Neighbor> neighbors;
  bool truncated = false;      // k exceeded the corpus size
  std::size_t visited = 0;     // distinct nodes whose distance was computed
};

// Layered small-world proximity graph over an EmbeddingSet.
//
// Nodes are inserted in row (entry id) order. A node's top layer is drawn
// from a geometric distribution keyed by (seed, entry_id), so the graph is a
// pure function of the embeddings and the parameters. Every adjacency list
// holds at most max_degree nodes, and the layer-0 graph is reachable from the
// entry point.
//
// File form ("PAI1", little-endian):
//   "PAI1" | version u32 | max_degree u32 | ef_construction u32 | seed u64
//   | dim u32 | node count u64 | entry point u64 | max level u32
//   | corpus fingerprint u8[32] | per node: entry_id u64, top level u32
//   | list count u64 | offsets u64[list count + 1] | adjacency length u64
//   | adjacency u32[]: per list, degree followed by neighbor node indices
// Lists are ordered node-major, level-ascending; offsets count u32 words.
class AnnIndex {
 public:
  static constexpr std::uint32_t kVersion = 1;

  static AnnIndex build(std::shared_ptr<const EmbeddingSet> set,
                        const AnnParams& params, const Digest& fingerprint = {});

  // Best-effort k nearest by coarse distance. Requires ef_search >= k.
  AnnResult search(std::span<const float> query, std::size_t k,
                   std::size_t ef_search) const;

  std::vector<std::uint8_t> serialize() const;
  // The set must be the one the index was built over (ids are checked).
  static AnnIndex parse(std::span<const std::uint8_t> bytes,
                        std::shared_ptr<const EmbeddingSet> set);

  std::size_t size() const noexcept { return levels_.size(); }
  const AnnParams& params() const noexcept { return params_; }
  const Digest& fingerprint() const noexcept { return fingerprint_; }
  std::uint32_t entry_point() const noexcept { return entry_; }
  int max_level() const noexcept { return max_level_; }
  int node_level(std::uint32_t node) const { return levels_[node]; }
  std::span<const std::uint32_t> neighbors(std::uint32_t node, int level) const {
    return links_[node][level];
  }
  std::size_t edge_count() const;
  const EmbeddingSet& embeddings() const noexcept { return *set_; }

 private:
  using Candidate = std::pair<double, std::uint32_t>;  // squared distance, node

  struct VisitCounter {
    explicit VisitCounter(std::size_t n) : seen(n, 0) {}
    void note(std::uint32_t node) {
      if (!seen[node]) {
        seen[node] = 1;
        ++count;
      }
    }
    std::vector<char> seen;
    std::size_t count = 0;
  };

  double distance_sq(std::span<const float> q, std::uint32_t node) const;
  double distance_sq(std::uint32_t a, std::uint32_t b) const;
  std::vector<Candidate> search_layer(std::span<const float> q,
                                      const std::vector<Candidate>& entry_points,
                                      std::size_t ef, int level,
                                      std::vector<std::uint32_t>& visit_mark,
                                      std::uint32_t epoch,
                                      VisitCounter* counter) const;
  std::vector<std::uint32_t> select_neighbors(std::uint32_t base,
                                              std::vector<Candidate> candidates) const;
  void insert(std::uint32_t node, std::vector<std::uint32_t>& visit_mark,
              std::uint32_t& epoch);
  void repair_reachability();

  std::shared_ptr<const EmbeddingSet> set_;
  AnnParams params_;
  Digest fingerprint_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

// Free-function form of AnnIndex::search; flags k > corpus size instead of
// failing.
AnnResult ann_knn(const AnnIndex& index, std::span<const float> query,
                  std::size_t k, std::size_t ef_search);

// Node level for (seed, entry_id) under multiplier 1/ln(max_degree).
int ann_node_level(std::uint64_t seed, std::uint64_t entry_id,
                   std::uint32_t max_degree);

}  // namespace provaudit

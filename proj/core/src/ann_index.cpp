#include "provaudit/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <string>

#include "binary_io.hpp"
#include "provaudit/error.hpp"

namespace provaudit {

namespace {

constexpr int kMaxLevel = 31;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

using Candidate = std::pair<double, std::uint32_t>;

struct FartherFirst {
  bool operator()(const Candidate& a, const Candidate& b) const { return a < b; }
};
struct NearerFirst {
  bool operator()(const Candidate& a, const Candidate& b) const { return a > b; }
};

}  // namespace

int ann_node_level(std::uint64_t seed, std::uint64_t entry_id,
                   std::uint32_t max_degree) {
  const std::uint64_t bits = splitmix64(seed ^ splitmix64(entry_id));
  // u in (0, 1]
  const double u = (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  const double ml = 1.0 / std::log(static_cast<double>(std::max<std::uint32_t>(max_degree, 2)));
  return std::min(kMaxLevel, static_cast<int>(-std::log(u) * ml));
}

double AnnIndex::distance_sq(std::span<const float> q, std::uint32_t node) const {
  const auto row = set_->row(node);
  double ss = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double d = static_cast<double>(q[i]) - row[i];
    ss += d * d;
  }
  return ss;
}

double AnnIndex::distance_sq(std::uint32_t a, std::uint32_t b) const {
  return distance_sq(set_->row(a), b);
}

std::size_t AnnIndex::edge_count() const {
  std::size_t edges = 0;
  for (const auto& node : links_) {
    for (const auto& list : node) edges += list.size();
  }
  return edges;
}

std::vector<Candidate> AnnIndex::search_layer(
    std::span<const float> q, const std::vector<Candidate>& entry_points,
    std::size_t ef, int level, std::vector<std::uint32_t>& visit_mark,
    std::uint32_t epoch, VisitCounter* counter) const {
  std::priority_queue<Candidate, std::vector<Candidate>, NearerFirst> frontier;
  std::priority_queue<Candidate, std::vector<Candidate>, FartherFirst> best;
  for (const Candidate& ep : entry_points) {
    if (visit_mark[ep.second] == epoch) continue;
    visit_mark[ep.second] = epoch;
    frontier.push(ep);
    best.push(ep);
    if (best.size() > ef) best.pop();
  }
  while (!frontier.empty()) {
    const Candidate current = frontier.top();
    // Stop only once the beam is full; a partial beam keeps expanding, so
    // ef >= corpus size degenerates to a full scan of the reachable graph.
    if (best.size() >= ef && current > best.top()) break;
    frontier.pop();
    for (std::uint32_t nb : links_[current.second][level]) {
      if (visit_mark[nb] == epoch) continue;
      visit_mark[nb] = epoch;
      const Candidate c{distance_sq(q, nb), nb};
      if (counter != nullptr) counter->note(nb);
      if (best.size() < ef || c < best.top()) {
        frontier.push(c);
        best.push(c);
        if (best.size() > ef) best.pop();
      }
    }
  }
  std::vector<Candidate> out(best.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = best.top();
    best.pop();
  }
  return out;
}

// Keeps a candidate only if it is closer to the base than to every neighbor
// already kept, then tops up with the closest rejected ones.
std::vector<std::uint32_t> AnnIndex::select_neighbors(
    std::uint32_t base, std::vector<Candidate> candidates) const {
  std::sort(candidates.begin(), candidates.end());
  const std::size_t m = params_.max_degree;
  std::vector<std::uint32_t> kept;
  std::vector<std::uint32_t> rejected;
  for (const Candidate& c : candidates) {
    if (c.second == base) continue;
    if (kept.size() >= m) break;
    bool diverse = true;
    for (std::uint32_t s : kept) {
      if (distance_sq(c.second, s) < c.first) {
        diverse = false;
        break;
      }
    }
    (diverse ? kept : rejected).push_back(c.second);
  }
  for (std::uint32_t r : rejected) {
    if (kept.size() >= m) break;
    kept.push_back(r);
  }
  return kept;
}

void AnnIndex::insert(std::uint32_t node, std::vector<std::uint32_t>& visit_mark,
                      std::uint32_t& epoch) {
  const int level = levels_[node];
  links_[node].resize(level + 1);
  if (max_level_ < 0) {
    entry_ = node;
    max_level_ = level;
    return;
  }
  const auto q = set_->row(node);
  std::vector<Candidate> eps{{distance_sq(q, entry_), entry_}};
  for (int l = max_level_; l > level; --l) {
    eps = search_layer(q, eps, 1, l, visit_mark, ++epoch, nullptr);
  }
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    eps = search_layer(q, eps, params_.ef_construction, l, visit_mark, ++epoch,
                       nullptr);
    links_[node][l] = select_neighbors(node, eps);
    for (std::uint32_t nb : links_[node][l]) {
      auto& back = links_[nb][l];
      back.push_back(node);
      if (back.size() > params_.max_degree) {
        std::vector<Candidate> cands;
        cands.reserve(back.size());
        for (std::uint32_t x : back) cands.emplace_back(distance_sq(nb, x), x);
        back = select_neighbors(nb, std::move(cands));
      }
    }
  }
  if (level > max_level_) {
    entry_ = node;
    max_level_ = level;
  }
}

// Neighbor pruning can leave a node with no incoming layer-0 edge. Each such
// node gets an edge from its nearest reachable node, evicting that node's
// farthest neighbor that still has another incoming edge when it is full.
void AnnIndex::repair_reachability() {
  const std::size_t n = levels_.size();
  if (n == 0) return;
  for (int round = 0; round < 8; ++round) {
    std::vector<char> reached(n, 0);
    std::deque<std::uint32_t> queue{entry_};
    reached[entry_] = 1;
    auto flood = [&]() {
      while (!queue.empty()) {
        const std::uint32_t u = queue.front();
        queue.pop_front();
        for (std::uint32_t nb : links_[u][0]) {
          if (!reached[nb]) {
            reached[nb] = 1;
            queue.push_back(nb);
          }
        }
      }
    };
    flood();
    bool changed = false;
    for (std::uint32_t u = 0; u < n; ++u) {
      if (reached[u]) continue;
      changed = true;
      std::vector<Candidate> sources;
      for (std::uint32_t v = 0; v < n; ++v) {
        if (reached[v]) sources.emplace_back(distance_sq(u, v), v);
      }
      std::sort(sources.begin(), sources.end());
      std::uint32_t host = sources.front().second;
      bool placed = false;
      for (const Candidate& s : sources) {
        if (links_[s.second][0].size() < params_.max_degree) {
          host = s.second;
          links_[host][0].push_back(u);
          placed = true;
          break;
        }
      }
      if (!placed) {
        // Every reached node is full. Route one of the host's edges through
        // u: host -> u -> x keeps x, and whatever hangs off x, reachable.
        auto& list = links_[host][0];
        std::size_t evict = 0;
        for (std::size_t i = 1; i < list.size(); ++i) {
          if (distance_sq(host, list[i]) > distance_sq(host, list[evict])) evict = i;
        }
        const std::uint32_t x = list[evict];
        list[evict] = u;
        auto& own = links_[u][0];
        if (std::find(own.begin(), own.end(), x) == own.end()) {
          if (own.size() < params_.max_degree) {
            own.push_back(x);
          } else {
            // Targets of u were unreachable until now; any that lose this
            // edge are picked up later in the sweep.
            std::size_t far = 0;
            for (std::size_t i = 1; i < own.size(); ++i) {
              if (distance_sq(u, own[i]) > distance_sq(u, own[far])) far = i;
            }
            own[far] = x;
          }
        }
      }
      reached[u] = 1;
      queue.push_back(u);
      flood();
    }
    if (!changed) return;
  }
}

AnnIndex AnnIndex::build(std::shared_ptr<const EmbeddingSet> set,
                         const AnnParams& params, const Digest& fingerprint) {
  if (!set || set->empty()) throw EmptyCorpusError();
  if (params.max_degree < 2) throw ConfigError("max degree must be at least 2");
  if (params.ef_construction < 1) throw ConfigError("ef_construction must be >= 1");
  if (set->size() > 0xFFFFFFFFull) throw ConfigError("corpus too large for u32 node ids");
  AnnIndex index;
  index.set_ = std::move(set);
  index.params_ = params;
  index.fingerprint_ = fingerprint;
  const std::size_t n = index.set_->size();
  index.levels_.resize(n);
  index.links_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    index.levels_[i] = ann_node_level(params.seed, index.set_->id(i), params.max_degree);
  }
  std::vector<std::uint32_t> visit_mark(n, 0);
  std::uint32_t epoch = 0;
  for (std::uint32_t i = 0; i < n; ++i) index.insert(i, visit_mark, epoch);
  index.repair_reachability();
  return index;
}

AnnResult AnnIndex::search(std::span<const float> query, std::size_t k,
                           std::size_t ef_search) const {
  if (levels_.empty()) throw EmptyCorpusError();
  if (k == 0) throw ConfigError("k must be at least 1");
  if (ef_search < k) throw ConfigError("ef_search must be >= k");
  if (query.size() != set_->dim()) {
    throw MetricError("query dimension " + std::to_string(query.size()) +
                      " does not match index dimension " +
                      std::to_string(set_->dim()));
  }
  AnnResult result;
  std::vector<std::uint32_t> visit_mark(levels_.size(), 0);
  std::uint32_t epoch = 0;
  VisitCounter counter(levels_.size());
  std::vector<Candidate> eps{{distance_sq(query, entry_), entry_}};
  counter.note(entry_);
  for (int l = max_level_; l > 0; --l) {
    eps = search_layer(query, eps, 1, l, visit_mark, ++epoch, &counter);
  }
  eps = search_layer(query, eps, ef_search, 0, visit_mark, ++epoch, &counter);
  result.visited = counter.count;
  const std::size_t take = std::min(k, eps.size());
  result.truncated = k > levels_.size();
  result.neighbors.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    result.neighbors.push_back(
        {set_->id(eps[i].second), std::sqrt(eps[i].first), std::nullopt});
  }
  return result;
}

AnnResult ann_knn(const AnnIndex& index, std::span<const float> query,
                  std::size_t k, std::size_t ef_search) {
  const std::size_t n = index.size();
  if (k > n) {
    AnnResult r = index.search(query, n, std::max(ef_search, n));
    r.truncated = true;
    return r;
  }
  return index.search(query, k, ef_search);
}

std::vector<std::uint8_t> AnnIndex::serialize() const {
  detail::ByteWriter w;
  w.magic("PAI1");
  w.u32(kVersion);
  w.u32(params_.max_degree);
  w.u32(params_.ef_construction);
  w.u64(params_.seed);
  w.u32(static_cast<std::uint32_t>(set_->dim()));
  w.u64(levels_.size());
  w.u64(entry_);
  w.u32(static_cast<std::uint32_t>(max_level_));
  w.raw(fingerprint_.bytes);
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    w.u64(set_->id(i));
    w.u32(static_cast<std::uint32_t>(levels_[i]));
  }
  std::vector<std::uint64_t> offsets{0};
  std::vector<std::uint32_t> adjacency;
  for (const auto& node : links_) {
    for (const auto& list : node) {
      adjacency.push_back(static_cast<std::uint32_t>(list.size()));
      adjacency.insert(adjacency.end(), list.begin(), list.end());
      offsets.push_back(adjacency.size());
    }
  }
  w.u64(offsets.size() - 1);
  for (std::uint64_t o : offsets) w.u64(o);
  w.u64(adjacency.size());
  for (std::uint32_t a : adjacency) w.u32(a);
  return w.take();
}

AnnIndex AnnIndex::parse(std::span<const std::uint8_t> bytes,
                         std::shared_ptr<const EmbeddingSet> set) {
  detail::ByteReader r(bytes, "PAI1");
  r.expect_magic("PAI1");
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("unsupported PAI1 version " + std::to_string(version));
  }
  AnnIndex index;
  index.params_.max_degree = r.u32();
  index.params_.ef_construction = r.u32();
  index.params_.seed = r.u64();
  const std::uint32_t dim = r.u32();
  const std::uint64_t n = r.u64();
  const std::uint64_t entry = r.u64();
  const std::uint32_t max_level = r.u32();
  const auto fp = r.raw(32);
  std::copy(fp.begin(), fp.end(), index.fingerprint_.bytes.begin());
  if (!set || set->size() != n || set->dim() != dim) {
    throw CorpusIntegrityError("index does not match the corpus embeddings (size or dimension)");
  }
  if (n == 0 || entry >= n || max_level > static_cast<std::uint32_t>(kMaxLevel)) {
    throw FormatError("PAI1 header out of range");
  }
  index.set_ = std::move(set);
  index.entry_ = static_cast<std::uint32_t>(entry);
  index.max_level_ = static_cast<int>(max_level);
  index.levels_.resize(n);
  index.links_.resize(n);
  std::uint64_t expected_lists = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (r.u64() != index.set_->id(i)) {
      throw CorpusIntegrityError("index node " + std::to_string(i) +
                                 " refers to a different entry id");
    }
    const std::uint32_t lvl = r.u32();
    if (lvl > max_level) throw FormatError("PAI1 node level exceeds max level");
    index.levels_[i] = static_cast<int>(lvl);
    expected_lists += lvl + 1;
  }
  const std::uint64_t lists = r.u64();
  if (lists != expected_lists) throw FormatError("PAI1 list count mismatch");
  if (lists + 1 > r.remaining() / 8) throw FormatError("PAI1 offsets truncated");
  std::vector<std::uint64_t> offsets(lists + 1);
  for (auto& o : offsets) o = r.u64();
  const std::uint64_t adj_len = r.u64();
  if (adj_len != offsets.back() || adj_len > r.remaining() / 4) {
    throw FormatError("PAI1 adjacency length mismatch");
  }
  std::vector<std::uint32_t> adjacency(adj_len);
  for (auto& a : adjacency) a = r.u32();
  if (r.remaining() != 0) throw FormatError("PAI1 has trailing bytes");
  std::size_t list = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    index.links_[i].resize(index.levels_[i] + 1);
    for (auto& nbrs : index.links_[i]) {
      const std::uint64_t begin = offsets[list];
      const std::uint64_t end = offsets[list + 1];
      if (begin >= end || end > adj_len || adjacency[begin] != end - begin - 1) {
        throw FormatError("PAI1 adjacency list " + std::to_string(list) + " is malformed");
      }
      nbrs.assign(adjacency.begin() + begin + 1, adjacency.begin() + end);
      for (std::uint32_t nb : nbrs) {
        if (nb >= n) throw FormatError("PAI1 neighbor index out of range");
      }
      ++list;
    }
  }
  return index;
}

}  // namespace provaudit

#include "licm/graph.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "licm/hash.hpp"

namespace licm::graph {

bool heavier_first(const Neighbor& a, const Neighbor& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  return a.node < b.node;
}

namespace {

void check_node(NodeId n, std::size_t num_nodes, const char* what) {
  if (n < 0 || static_cast<std::size_t>(n) >= num_nodes) {
    throw std::out_of_range(std::string(what) + " node " + std::to_string(n) + " outside [0," +
                            std::to_string(num_nodes) + ")");
  }
}

}  // namespace

NewsGraph::NewsGraph(std::size_t num_nodes, const EdgeWeights& weights)
    : ranked_(num_nodes), by_id_(num_nodes) {
  for (const auto& [key, w] : weights) {
    check_node(key.first, num_nodes, "edge source");
    check_node(key.second, num_nodes, "edge target");
    if (w == 0) continue;
    by_id_[static_cast<std::size_t>(key.first)].push_back({key.second, w});
    ++num_edges_;
  }
  for (std::size_t n = 0; n < num_nodes; ++n) {
    ranked_[n] = by_id_[n];  // map order already sorts by_id_ by target
    std::sort(ranked_[n].begin(), ranked_[n].end(), heavier_first);
  }
}

std::uint64_t NewsGraph::total_weight() const {
  std::uint64_t s = 0;
  for (const auto& adj : by_id_)
    for (const auto& nb : adj) s += nb.weight;
  return s;
}

std::uint32_t NewsGraph::weight(NodeId src, NodeId dst) const {
  if (!contains(src)) return 0;
  const auto& adj = by_id_[static_cast<std::size_t>(src)];
  auto it = std::lower_bound(adj.begin(), adj.end(), dst,
                             [](const Neighbor& nb, NodeId id) { return nb.node < id; });
  return it != adj.end() && it->node == dst ? it->weight : 0;
}

std::span<const Neighbor> NewsGraph::out_neighbors(NodeId n) const {
  if (!contains(n)) return {};
  return ranked_[static_cast<std::size_t>(n)];
}

std::vector<Edge> NewsGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges_);
  for (std::size_t n = 0; n < by_id_.size(); ++n)
    for (const auto& nb : by_id_[n]) out.push_back({static_cast<NodeId>(n), nb.node, nb.weight});
  return out;
}

EntityGraph::EntityGraph(std::size_t num_nodes, const EdgeWeights& weights) : ranked_(num_nodes) {
  for (const auto& [key, w] : weights) {
    check_node(key.first, num_nodes, "entity edge");
    check_node(key.second, num_nodes, "entity edge");
    if (key.first >= key.second) throw std::invalid_argument("entity edge keys need src < dst");
    if (w == 0) continue;
    ranked_[static_cast<std::size_t>(key.first)].push_back({key.second, w});
    ranked_[static_cast<std::size_t>(key.second)].push_back({key.first, w});
    ++num_edges_;
  }
  for (auto& adj : ranked_) std::sort(adj.begin(), adj.end(), heavier_first);
}

std::uint64_t EntityGraph::total_weight() const {
  std::uint64_t s = 0;
  for (const auto& e : edges()) s += e.weight;
  return s;
}

std::uint32_t EntityGraph::weight(NodeId a, NodeId b) const {
  for (const auto& nb : neighbors(a))
    if (nb.node == b) return nb.weight;
  return 0;
}

std::span<const Neighbor> EntityGraph::neighbors(NodeId n) const {
  if (n < 0 || static_cast<std::size_t>(n) >= ranked_.size()) return {};
  return ranked_[static_cast<std::size_t>(n)];
}

std::vector<Edge> EntityGraph::edges() const {
  std::vector<Edge> out;
  for (std::size_t n = 0; n < ranked_.size(); ++n)
    for (const auto& nb : ranked_[n])
      if (static_cast<std::size_t>(nb.node) > n) out.push_back({static_cast<NodeId>(n), nb.node, nb.weight});
  std::sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) {
    return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
  });
  return out;
}

std::map<std::string, std::vector<NodeId>> user_histories(
    std::span<const data::IndexedImpression* const> impressions) {
  std::map<std::string, std::vector<NodeId>> out;
  for (const auto* imp : impressions) {
    auto [it, inserted] = out.emplace(imp->user_id, imp->history);
    if (inserted) continue;
    auto& cur = it->second;
    if (imp->history.size() > cur.size() ||
        (imp->history.size() == cur.size() && imp->history < cur)) {
      cur = imp->history;
    }
  }
  return out;
}

NewsGraph build_news_graph(std::span<const data::IndexedImpression* const> impressions,
                           std::size_t num_nodes) {
  EdgeWeights weights;
  for (const auto& [user, history] : user_histories(impressions)) {
    for (std::size_t k = 0; k + 1 < history.size(); ++k) ++weights[{history[k], history[k + 1]}];
  }
  return NewsGraph(num_nodes, weights);
}

NewsGraph build_news_graph(const data::Bundle& bundle) {
  const auto train = bundle.split(data::Split::kTrain);
  return build_news_graph(train, bundle.corpus.num_news());
}

EntityGraph build_entity_graph(const data::NewsCorpus& corpus) {
  EdgeWeights weights;
  for (const auto& a : corpus.articles) {
    // Distinct entities only: a repeated entity is not a pair.
    std::vector<NodeId> ents(a.entities.begin(), a.entities.end());
    std::sort(ents.begin(), ents.end());
    ents.erase(std::unique(ents.begin(), ents.end()), ents.end());
    for (std::size_t i = 0; i < ents.size(); ++i)
      for (std::size_t j = i + 1; j < ents.size(); ++j) ++weights[{ents[i], ents[j]}];
  }
  return EntityGraph(corpus.entities.size(), weights);
}

NeighborSubgraph extract_neighbor_subgraph(const NewsGraph& graph, std::span<const NodeId> history,
                                           std::size_t m_n, std::size_t n_hops) {
  if (history.empty()) throw std::invalid_argument("extract_neighbor_subgraph: empty history");
  NeighborSubgraph sub;
  std::unordered_map<NodeId, std::size_t> local;
  auto slot = [&](NodeId n) {
    auto [it, inserted] = local.emplace(n, sub.nodes.size());
    if (inserted) sub.nodes.push_back(n);
    return std::pair(it->second, inserted);
  };

  std::vector<NodeId> frontier;
  for (NodeId h : history) {
    auto [idx, inserted] = slot(h);
    sub.history_slots.push_back(idx);
    if (inserted) frontier.push_back(h);
  }
  for (std::size_t hop = 0; hop < n_hops && !frontier.empty(); ++hop) {
    std::vector<NodeId> next;
    for (NodeId v : frontier) {
      const auto nbrs = graph.out_neighbors(v);
      const std::size_t keep = std::min(m_n, nbrs.size());
      const std::size_t src = local.at(v);
      for (std::size_t k = 0; k < keep; ++k) {
        auto [dst, inserted] = slot(nbrs[k].node);
        if (inserted) next.push_back(nbrs[k].node);
        sub.edges.push_back({v, nbrs[k].node, nbrs[k].weight});
        sub.local_edges.emplace_back(src, dst);
      }
    }
    frontier = std::move(next);
  }
  return sub;
}

std::vector<NodeId> top_entity_neighbors(const EntityGraph& graph, std::span<const NodeId> entities,
                                         std::size_t m_e) {
  std::vector<NodeId> out;
  for (NodeId e : entities) {
    const auto nbrs = graph.neighbors(e);
    const std::size_t keep = std::min(m_e, nbrs.size());
    for (std::size_t k = 0; k < keep; ++k) {
      if (std::find(out.begin(), out.end(), nbrs[k].node) == out.end()) out.push_back(nbrs[k].node);
    }
  }
  return out;
}

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T le() {
    using U = std::make_unsigned_t<T>;
    need(sizeof(T));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<U>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw SnapshotFormatError("truncated graph snapshot");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[8] = {'L', 'I', 'C', 'M', 'G', 'R', 'P', 'H'};

void write_edges(Writer& w, std::size_t nodes, const std::vector<Edge>& edges) {
  w.le<std::uint64_t>(nodes);
  w.le<std::uint64_t>(edges.size());
  for (const auto& e : edges) {
    w.le<std::int32_t>(e.src);
    w.le<std::int32_t>(e.dst);
    w.le<std::uint32_t>(e.weight);
  }
}

std::pair<std::size_t, EdgeWeights> read_edges(Reader& r) {
  const auto nodes = r.le<std::uint64_t>();
  const auto count = r.le<std::uint64_t>();
  EdgeWeights weights;
  std::pair<NodeId, NodeId> prev{-1, -1};
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto src = r.le<std::int32_t>();
    const auto dst = r.le<std::int32_t>();
    const auto w = r.le<std::uint32_t>();
    if (w == 0) throw SnapshotFormatError("zero-weight edge in snapshot");
    if (i > 0 && !(prev < std::pair(src, dst))) throw SnapshotFormatError("snapshot edges not sorted");
    prev = {src, dst};
    weights.emplace(std::pair(src, dst), w);
  }
  return {static_cast<std::size_t>(nodes), std::move(weights)};
}

}  // namespace

std::string serialize_snapshot(const GraphSnapshot& s) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.le<std::uint32_t>(kSnapshotVersion);
  w.le<std::uint64_t>(s.config_hash);
  write_edges(w, s.news.num_nodes(), s.news.edges());
  write_edges(w, s.entities.num_nodes(), s.entities.edges());
  return w.take();
}

GraphSnapshot deserialize_snapshot(std::string_view bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw SnapshotFormatError("not a graph snapshot");
  const auto version = r.le<std::uint32_t>();
  if (version != kSnapshotVersion) {
    throw SnapshotFormatError("unsupported snapshot version " + std::to_string(version));
  }
  GraphSnapshot s;
  s.config_hash = r.le<std::uint64_t>();
  try {
    auto [news_nodes, news_edges] = read_edges(r);
    s.news = NewsGraph(news_nodes, news_edges);
    auto [ent_nodes, ent_edges] = read_edges(r);
    s.entities = EntityGraph(ent_nodes, ent_edges);
  } catch (const std::out_of_range& e) {
    throw SnapshotFormatError(std::string("corrupt snapshot: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SnapshotFormatError(std::string("corrupt snapshot: ") + e.what());
  }
  if (!r.done()) throw SnapshotFormatError("trailing bytes after graph snapshot");
  return s;
}

void save_snapshot(const GraphSnapshot& snapshot, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto bytes = serialize_snapshot(snapshot);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

GraphSnapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_snapshot(bytes);
}

std::uint64_t snapshot_hash(const GraphSnapshot& snapshot) {
  return fnv1a64(serialize_snapshot(snapshot));
}

}  // namespace licm::graph

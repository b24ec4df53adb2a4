#pragma once

// Global click graph over news, global entity co-occurrence graph, and the
// per-user neighbor subgraphs fed to the graph encoder.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "licm/bundle.hpp"

namespace licm::graph {

using NodeId = std::int32_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  std::uint32_t weight = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  NodeId node = 0;
  std::uint32_t weight = 0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Orders neighbors by descending weight, ties by ascending node id.
bool heavier_first(const Neighbor& a, const Neighbor& b);

using EdgeWeights = std::map<std::pair<NodeId, NodeId>, std::uint32_t>;

// Directed weighted graph, immutable once built. Node ids are news indices.
class NewsGraph {
 public:
  NewsGraph() = default;
  NewsGraph(std::size_t num_nodes, const EdgeWeights& weights);

  std::size_t num_nodes() const { return ranked_.size(); }
  std::size_t num_edges() const { return num_edges_; }
  std::uint64_t total_weight() const;
  bool contains(NodeId n) const { return n >= 0 && static_cast<std::size_t>(n) < num_nodes(); }

  // 0 when the edge is absent.
  std::uint32_t weight(NodeId src, NodeId dst) const;
  // Out-neighbors ranked heaviest first (ties by ascending id).
  std::span<const Neighbor> out_neighbors(NodeId n) const;
  // Every edge sorted by (src, dst).
  std::vector<Edge> edges() const;

  friend bool operator==(const NewsGraph& a, const NewsGraph& b) {
    return a.num_nodes() == b.num_nodes() && a.edges() == b.edges();
  }

 private:
  std::vector<std::vector<Neighbor>> ranked_;
  std::vector<std::vector<Neighbor>> by_id_;
  std::size_t num_edges_ = 0;
};

// Undirected co-occurrence graph over entity indices. No self-edges.
class EntityGraph {
 public:
  EntityGraph() = default;
  // Keys must satisfy src < dst.
  EntityGraph(std::size_t num_nodes, const EdgeWeights& weights);

  std::size_t num_nodes() const { return ranked_.size(); }
  std::size_t num_edges() const { return num_edges_; }
  std::uint64_t total_weight() const;
  std::uint32_t weight(NodeId a, NodeId b) const;
  std::span<const Neighbor> neighbors(NodeId n) const;
  // Each undirected edge once, src < dst, sorted.
  std::vector<Edge> edges() const;

  friend bool operator==(const EntityGraph& a, const EntityGraph& b) {
    return a.num_nodes() == b.num_nodes() && a.edges() == b.edges();
  }

 private:
  std::vector<std::vector<Neighbor>> ranked_;
  std::size_t num_edges_ = 0;
};

// One history per user: the longest seen, ties broken by the lexicographically
// smallest sequence, so the choice does not depend on impression order.
std::map<std::string, std::vector<NodeId>> user_histories(
    std::span<const data::IndexedImpression* const> impressions);

// Every adjacent ordered pair (d_k, d_{k+1}) of every user's history adds 1 to
// w(d_k -> d_{k+1}).
NewsGraph build_news_graph(std::span<const data::IndexedImpression* const> impressions,
                           std::size_t num_nodes);
// Training-split convenience over a bundle.
NewsGraph build_news_graph(const data::Bundle& bundle);

// Every unordered pair of distinct entities within one article adds 1.
EntityGraph build_entity_graph(const data::NewsCorpus& corpus);

struct NeighborSubgraph {
  std::vector<NodeId> nodes;              // local index -> news id; history nodes first
  std::vector<std::size_t> history_slots;  // per history position, its local index
  std::vector<Edge> edges;                // global ids, weights copied from the graph
  std::vector<std::pair<std::size_t, std::size_t>> local_edges;  // (src, dst) local indices
};

// Breadth-first expansion from all history nodes: each hop keeps the top m_n
// out-neighbors of every frontier node; newly reached nodes form the next
// frontier. History nodes absent from the graph stay isolated.
NeighborSubgraph extract_neighbor_subgraph(const NewsGraph& graph, std::span<const NodeId> history,
                                           std::size_t m_n, std::size_t n_hops);

// Top m_e neighbors of each entity, concatenated in input order with
// duplicates removed.
std::vector<NodeId> top_entity_neighbors(const EntityGraph& graph, std::span<const NodeId> entities,
                                         std::size_t m_e);

// Binary snapshot (little-endian):
//   "LICMGRPH" | u32 version | u64 config_hash
//   news:   u64 nodes | u64 edges | edges as (i32 src, i32 dst, u32 weight) sorted by (src,dst)
//   entity: u64 nodes | u64 edges | same triples with src < dst
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct GraphSnapshot {
  NewsGraph news;
  EntityGraph entities;
  std::uint64_t config_hash = 0;
};

class SnapshotFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string serialize_snapshot(const GraphSnapshot& snapshot);
GraphSnapshot deserialize_snapshot(std::string_view bytes);
void save_snapshot(const GraphSnapshot& snapshot, const std::string& path);
GraphSnapshot load_snapshot(const std::string& path);
// FNV-1a over the serialized bytes.
std::uint64_t snapshot_hash(const GraphSnapshot& snapshot);

}  // namespace licm::graph

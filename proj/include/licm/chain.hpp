#pragma once

// Long-chain selection over the global click graph.
//
// From a clicked news item the walker repeatedly takes the top_n out-neighbors
// of the current node by click weight, keeps the one whose representation is
// most cosine-similar to the context vector, and moves there. Cycles are
// allowed, so a chain may bounce between two nodes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "licm/data.hpp"
#include "licm/graph.hpp"

namespace licm::chain {

using graph::NodeId;

enum class SimilarityContext {
  kOrigin,   // compare candidates against the clicked news anchoring the chain
  kRolling,  // compare against the node the walk currently stands on
};

struct ChainConfig {
  std::size_t top_n = 3;
  std::size_t max_hops = 8;
  SimilarityContext context = SimilarityContext::kOrigin;

  void validate() const;
};

struct LongChain {
  NodeId origin = data::kPad;
  std::vector<NodeId> nodes;              // walked nodes, origin excluded
  std::vector<std::uint32_t> weights;     // w(prev -> nodes[k])
  std::vector<double> similarities;       // sim(context, nodes[k])

  std::size_t valid_len() const { return nodes.size(); }
  // nodes padded with kPad up to max_hops.
  std::vector<NodeId> padded(std::size_t max_hops) const;
  std::vector<bool> mask(std::size_t max_hops) const;

  friend bool operator==(const LongChain&, const LongChain&) = default;
};

// Per-news vectors (rows indexed by news id) used for similarity.
using NewsVectors = data::EmbeddingTable;

// Cosine similarity; -1 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

// Top_n of v's out-neighbors by weight, ties by ascending id. Empty for sinks.
std::vector<NodeId> pick_candidates(const graph::NewsGraph& graph, NodeId v, std::size_t top_n);

struct Pruned {
  NodeId node = data::kPad;
  double similarity = -1.0;
};
// argmax of cosine(context, vec(s)) over candidates, ties by ascending id.
Pruned prune_by_similarity(std::span<const NodeId> candidates, std::span<const double> context,
                           const NewsVectors& vectors);

LongChain walk_chain(const graph::NewsGraph& graph, NodeId origin, const NewsVectors& vectors,
                     const ChainConfig& config);

std::vector<LongChain> chains_for_history(const graph::NewsGraph& graph,
                                          std::span<const NodeId> history,
                                          const NewsVectors& vectors, const ChainConfig& config);

// Chains keyed by origin for every distinct origin; walks run on up to
// `threads` workers and the result does not depend on the thread count.
class ChainCache {
 public:
  ChainCache() = default;
  void rebuild(const graph::NewsGraph& graph, std::span<const NodeId> origins,
               const NewsVectors& vectors, const ChainConfig& config, std::size_t threads = 1);
  const LongChain& get(NodeId origin) const;
  bool contains(NodeId origin) const;
  std::size_t size() const { return chains_.size(); }

 private:
  std::vector<NodeId> index_;  // sorted origins
  std::vector<LongChain> chains_;
};

}  // namespace licm::chain

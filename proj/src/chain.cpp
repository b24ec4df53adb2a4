#include "licm/chain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace licm::chain {

void ChainConfig::validate() const {
  if (top_n < 1) throw std::invalid_argument("chain top_n must be >= 1");
  if (max_hops < 1) throw std::invalid_argument("chain max_hops must be >= 1");
}

std::vector<NodeId> LongChain::padded(std::size_t max_hops) const {
  std::vector<NodeId> out(max_hops, data::kPad);
  std::copy_n(nodes.begin(), std::min(max_hops, nodes.size()), out.begin());
  return out;
}

std::vector<bool> LongChain::mask(std::size_t max_hops) const {
  std::vector<bool> out(max_hops, false);
  for (std::size_t i = 0; i < std::min(max_hops, nodes.size()); ++i) out[i] = true;
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return -1.0;
  return ab / std::sqrt(aa * bb);
}

std::vector<NodeId> pick_candidates(const graph::NewsGraph& graph, NodeId v, std::size_t top_n) {
  const auto nbrs = graph.out_neighbors(v);
  std::vector<NodeId> out;
  for (std::size_t k = 0; k < std::min(top_n, nbrs.size()); ++k) out.push_back(nbrs[k].node);
  return out;
}

Pruned prune_by_similarity(std::span<const NodeId> candidates, std::span<const double> context,
                           const NewsVectors& vectors) {
  if (candidates.empty()) throw std::invalid_argument("prune_by_similarity: no candidates");
  Pruned best;
  bool first = true;
  for (NodeId s : candidates) {
    const double sim = cosine(context, vectors.row(s));
    if (first || sim > best.similarity || (sim == best.similarity && s < best.node)) {
      best = {s, sim};
      first = false;
    }
  }
  return best;
}

LongChain walk_chain(const graph::NewsGraph& graph, NodeId origin, const NewsVectors& vectors,
                     const ChainConfig& config) {
  config.validate();
  LongChain chain;
  chain.origin = origin;
  if (!graph.contains(origin)) return chain;
  const auto origin_vec = vectors.row(origin);
  NodeId v = origin;
  for (std::size_t hop = 0; hop < config.max_hops; ++hop) {
    const auto cands = pick_candidates(graph, v, config.top_n);
    if (cands.empty()) break;
    const auto context =
        config.context == SimilarityContext::kOrigin ? origin_vec : vectors.row(v);
    const auto next = prune_by_similarity(cands, context, vectors);
    chain.weights.push_back(graph.weight(v, next.node));
    chain.similarities.push_back(next.similarity);
    chain.nodes.push_back(next.node);
    v = next.node;
  }
  return chain;
}

std::vector<LongChain> chains_for_history(const graph::NewsGraph& graph,
                                          std::span<const NodeId> history,
                                          const NewsVectors& vectors, const ChainConfig& config) {
  std::vector<LongChain> out;
  out.reserve(history.size());
  for (NodeId h : history) out.push_back(walk_chain(graph, h, vectors, config));
  return out;
}

void ChainCache::rebuild(const graph::NewsGraph& graph, std::span<const NodeId> origins,
                         const NewsVectors& vectors, const ChainConfig& config,
                         std::size_t threads) {
  index_.assign(origins.begin(), origins.end());
  std::sort(index_.begin(), index_.end());
  index_.erase(std::unique(index_.begin(), index_.end()), index_.end());
  chains_.assign(index_.size(), LongChain{});
  threads = std::max<std::size_t>(1, std::min(threads, index_.size()));
  // Static striping: each slot is written by exactly one worker.
  auto work = [&](std::size_t t) {
    for (std::size_t i = t; i < index_.size(); i += threads)
      chains_[i] = walk_chain(graph, index_[i], vectors, config);
  };
  if (threads == 1) {
    work(0);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
  for (auto& th : pool) th.join();
}

bool ChainCache::contains(NodeId origin) const {
  return std::binary_search(index_.begin(), index_.end(), origin);
}

const LongChain& ChainCache::get(NodeId origin) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), origin);
  if (it == index_.end() || *it != origin) {
    throw std::out_of_range("no chain cached for news " + std::to_string(origin));
  }
  return chains_[static_cast<std::size_t>(it - index_.begin())];
}

}  // namespace licm::chain

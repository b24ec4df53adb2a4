#pragma once

// Forward passes over whole impressions: bulk news encoding, chain refresh,
// and user/candidate scoring shared by training and evaluation.

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "licm/chain.hpp"
#include "licm/config.hpp"
#include "licm/graph.hpp"
#include "licm/model.hpp"

namespace licm {

using graph::NodeId;

// Encodes every article (index 0 included) in eval mode without recording
// gradients. Articles are striped over `threads` workers.
std::vector<enc::NewsRepr> encode_all_news(const enc::LicmModel& model, const data::Bundle& bundle,
                                           std::size_t threads = 1);

// h_ln of every article as a table usable by the chain walker.
chain::NewsVectors chain_vectors(std::span<const enc::NewsRepr> news, std::size_t dim);

// Mean pretrained word vector of each title; zero rows for empty titles.
chain::NewsVectors title_vectors(const data::Bundle& bundle);

// Every distinct news id appearing in any history of the bundle.
std::vector<NodeId> history_origins(const data::Bundle& bundle);

// Scores impressions for one fixed set of parameters. Not thread-safe; give
// each worker its own instance.
class ImpressionScorer {
 public:
  ImpressionScorer(const enc::LicmModel& model, const data::Bundle& bundle,
                   const graph::GraphSnapshot& graphs, const RunConfig& config,
                   const chain::ChainCache& chains, enc::NewsReprCache& news,
                   enc::ForwardContext& ctx)
      : model_(model),
        bundle_(bundle),
        graphs_(graphs),
        config_(config),
        chains_(chains),
        news_(news),
        ctx_(ctx) {}

  // Subgraphs may be supplied by the caller (they only depend on the history
  // and the frozen graph); otherwise they are extracted on the fly.
  enc::UserRepr user(std::span<const NodeId> history,
                     const graph::NeighborSubgraph* subgraph = nullptr);
  const num::Tensor& candidate(NodeId news);
  // Inner products emb_user · emb_cand, one per candidate.
  num::Tensor scores(const enc::UserRepr& user, std::span<const NodeId> candidates);

 private:
  const enc::LicmModel& model_;
  const data::Bundle& bundle_;
  const graph::GraphSnapshot& graphs_;
  const RunConfig& config_;
  const chain::ChainCache& chains_;
  enc::NewsReprCache& news_;
  enc::ForwardContext& ctx_;
  std::map<NodeId, num::Tensor> candidates_;
};

}  // namespace licm

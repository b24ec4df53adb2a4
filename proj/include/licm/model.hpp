#pragma once

// Representation learning: news encoder, long-chain interest encoder, GGNN
// neighbor encoder, fusion gate, user aggregator and candidate encoder.
//
// All hidden representations share the width d. Title words pass through
// multi-head self-attention, get mixed with category/subcategory embeddings
// by a linear layer and are attention-pooled into h_ln. Entities follow an
// analogous path into h_le. For every history item the chain encoder pools
// the chain nodes' h_ln into l_n, the GGNN produces N_t from the neighbor
// subgraph, and a sigmoid gate blends the two into O_t. Each history item is
// then summarized by pooling {h_ln, h_le, O_t}; the sequence goes through
// self-attention and a final pool, and the user-level chain vector L_n is
// added as a residual.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "licm/adam.hpp"
#include "licm/attention.hpp"
#include "licm/chain.hpp"
#include "licm/config.hpp"
#include "licm/data.hpp"
#include "licm/graph.hpp"
#include "licm/ops.hpp"
#include "licm/random.hpp"

namespace licm::enc {

using num::Tensor;

struct ModelConfig {
  std::size_t d = 400;
  std::size_t heads = 20;
  std::size_t cat_dim = 100;
  std::size_t att_dim = 200;
  std::size_t ggnn_layers = 2;
  double dropout = 0.2;
  bool use_chain = true;

  static ModelConfig from(const RunConfig& rc);
};

struct ModelDims {
  std::size_t word_dim = 300;
  std::size_t entity_dim = 100;
  std::size_t n_categories = 1;
  std::size_t n_subcategories = 1;

  static ModelDims from(const data::Bundle& bundle);
};

// Per-forward state: train/eval mode, the dropout stream, and an optional
// audit hook that sees every attention weight vector and gate produced.
class ForwardContext {
 public:
  ForwardContext() = default;
  ForwardContext(bool training, std::uint64_t seed) : training_(training), rng_(seed) {}

  bool training() const { return training_; }
  Rng& rng() { return rng_; }

  enum class Probe { kAttention, kGate };
  using Auditor = std::function<void(Probe, const Tensor&)>;
  void set_auditor(Auditor a) { auditor_ = std::move(a); }
  void audit(Probe p, const Tensor& t) const {
    if (auditor_) auditor_(p, t);
  }

 private:
  bool training_ = false;
  Rng rng_{0};
  Auditor auditor_;
};

struct NewsRepr {
  Tensor h_ln;      // [d], zero when the title is empty
  Tensor h_le;      // [d], zero when there are no entities
  Tensor c_n;       // [T x d] category-mixed word representations (undefined if no title)
  bool has_title = false;
  bool has_entities = false;
};

struct FuseResult {
  Tensor output;  // O_t
  Tensor gate;    // G
};

// One history position as seen by the user aggregator.
struct HistoryItem {
  const NewsRepr* news = nullptr;
  Tensor fused;  // O_t
};

struct UserRepr {
  std::vector<Tensor> neighbor;  // N_t per history position
  std::vector<Tensor> chain;     // l_n per history position
  std::vector<Tensor> fused;     // O_t per history position
  Tensor chain_user;             // L_n
  Tensor emb_user;
  bool cold = false;
};

struct CandidateRepr {
  Tensor h_ln;
  Tensor h_le;
  Tensor h_ge;
  Tensor emb_cand;
};

class LicmModel;

// Lazily encodes and memoizes news representations for one forward graph.
// With a precomputed table (indexed by news id) lookups never encode.
class NewsReprCache {
 public:
  NewsReprCache(const LicmModel& model, const data::Bundle& bundle, ForwardContext& ctx,
                const std::vector<NewsRepr>* precomputed = nullptr)
      : model_(model), bundle_(bundle), ctx_(ctx), precomputed_(precomputed) {}
  const NewsRepr& get(graph::NodeId news);
  std::size_t size() const { return cache_.size(); }

 private:
  const LicmModel& model_;
  const data::Bundle& bundle_;
  ForwardContext& ctx_;
  const std::vector<NewsRepr>* precomputed_;
  std::map<graph::NodeId, NewsRepr> cache_;
};

// Dense [n x n] adjacency of the subgraph with edges taken in both directions.
num::SparseMatrix neighbor_adjacency(const graph::NeighborSubgraph& subgraph);

class LicmModel {
 public:
  LicmModel(const ModelConfig& config, const ModelDims& dims, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const ModelDims& dims() const { return dims_; }
  num::ParamStore& params() { return params_; }
  const num::ParamStore& params() const { return params_; }

  NewsRepr encode_news(const data::NewsArticle& article, const data::EmbeddingTable& words,
                       const data::EmbeddingTable& entities, ForwardContext& ctx) const;

  // l_n: attention pool over the chain nodes' h_ln (rows of `node_vectors`,
  // only the first valid_len are used). Zero vector when valid_len is 0.
  Tensor encode_chain_news(std::span<const Tensor> node_vectors, ForwardContext& ctx) const;

  // L_n: attention pool over per-item chain vectors, skipping items whose
  // chain was empty. Zero when no item has a chain.
  Tensor encode_chain_user(std::span<const Tensor> chain_vectors, const std::vector<bool>& valid,
                           ForwardContext& ctx) const;

  // Runs `layers` GGNN steps over the subgraph; returns every node's state.
  Tensor encode_neighbors(const num::SparseMatrix& adjacency, const Tensor& initial,
                          std::size_t layers) const;

  FuseResult fuse(const Tensor& neighbor, const Tensor& chain, ForwardContext& ctx) const;

  // Pools each item's {h_ln, h_le, O_t} into n_k, runs self-attention over the
  // sequence and pools again. Does not add the chain residual.
  Tensor aggregate_user(std::span<const HistoryItem> items, ForwardContext& ctx) const;

  // Full user tower for one history.
  UserRepr encode_user(std::span<const graph::NodeId> history,
                       const graph::NeighborSubgraph& subgraph, const chain::ChainCache& chains,
                       NewsReprCache& news, ForwardContext& ctx) const;

  CandidateRepr encode_candidate(const NewsRepr& news, std::span<const graph::NodeId> neighbor_entities,
                                 const data::EmbeddingTable& entities, ForwardContext& ctx) const;
  CandidateRepr encode_candidate(const data::NewsArticle& article, const graph::EntityGraph& entity_graph,
                                 std::size_t m_e, const data::Bundle& bundle, ForwardContext& ctx) const;

  Tensor zero_vector() const { return Tensor::zeros({config_.d}); }

 private:
  const Tensor& p(const char* name) const { return params_.get(name); }
  num::AttentionPoolParams pool(const std::string& prefix) const;
  num::MsaParams msa(const std::string& prefix) const;
  Tensor maybe_dropout(const Tensor& t, ForwardContext& ctx) const;
  num::PoolResult audited_pool(const Tensor& values, const std::string& prefix,
                               const std::vector<bool>& mask, ForwardContext& ctx) const;
  Tensor entity_tower(std::span<const std::int32_t> ids, const data::EmbeddingTable& table,
                      const std::string& prefix, ForwardContext& ctx) const;

  ModelConfig config_;
  ModelDims dims_;
  num::ParamStore params_;
};

}  // namespace licm::enc

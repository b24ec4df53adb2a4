#include "licm/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace licm::enc {

using num::Shape;

ModelConfig ModelConfig::from(const RunConfig& rc) {
  ModelConfig c;
  c.d = rc.d;
  c.heads = rc.heads;
  c.cat_dim = rc.cat_dim;
  c.att_dim = rc.att_dim;
  c.ggnn_layers = rc.ggnn_layers;
  c.dropout = rc.dropout;
  c.use_chain = rc.use_chain;
  return c;
}

ModelDims ModelDims::from(const data::Bundle& bundle) {
  ModelDims d;
  d.word_dim = bundle.word_embeddings.dim();
  d.entity_dim = bundle.entity_embeddings.dim();
  d.n_categories = bundle.corpus.categories.size();
  d.n_subcategories = bundle.corpus.subcategories.size();
  return d;
}

const NewsRepr& NewsReprCache::get(graph::NodeId news) {
  if (precomputed_) return precomputed_->at(static_cast<std::size_t>(news));
  auto it = cache_.find(news);
  if (it != cache_.end()) return it->second;
  auto repr = model_.encode_news(bundle_.corpus.article(news), bundle_.word_embeddings,
                                 bundle_.entity_embeddings, ctx_);
  return cache_.emplace(news, std::move(repr)).first->second;
}

num::SparseMatrix neighbor_adjacency(const graph::NeighborSubgraph& subgraph) {
  const std::size_t n = subgraph.nodes.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [s, t] : subgraph.local_edges) {
    if (s == t) continue;
    adj[s].push_back(t);
    adj[t].push_back(s);
  }
  num::SparseMatrix m;
  m.rows = m.cols = n;
  m.row_ptr.push_back(0);
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (auto c : row) {
      m.col_idx.push_back(c);
      m.values.push_back(1.0);
    }
    m.row_ptr.push_back(m.col_idx.size());
  }
  return m;
}

LicmModel::LicmModel(const ModelConfig& config, const ModelDims& dims, std::uint64_t seed)
    : config_(config), dims_(dims) {
  if (config_.heads == 0 || config_.d % config_.heads != 0) {
    throw std::invalid_argument("configuration error: d=" + std::to_string(config_.d) +
                                " not divisible by heads=" + std::to_string(config_.heads));
  }
  Rng rng(seed, 0x6d6f64656c);
  const std::size_t d = config_.d, a = config_.att_dim, c = config_.cat_dim;
  auto msa = [&](const std::string& prefix, std::size_t in) {
    params_.add_xavier(prefix + ".wq", {in, d}, rng);
    params_.add_xavier(prefix + ".wk", {in, d}, rng);
    params_.add_xavier(prefix + ".wv", {in, d}, rng);
  };
  auto pool = [&](const std::string& prefix) {
    params_.add_xavier(prefix + ".proj", {d, a}, rng);
    params_.add_xavier(prefix + ".query", {a}, rng);
  };

  msa("news.msa", dims_.word_dim);
  params_.add_xavier("news.category", {dims_.n_categories, c}, rng);
  params_.add_xavier("news.subcategory", {dims_.n_subcategories, c}, rng);
  params_.add_xavier("news.mix.w", {d + 2 * c, d}, rng);
  params_.add_zeros("news.mix.b", {d});
  pool("news.pool");
  msa("entity.msa", dims_.entity_dim);
  pool("entity.pool");

  pool("chain.news_pool");
  pool("chain.user_pool");

  params_.add_xavier("ggnn.w_g", {d, d}, rng);
  for (const char* gate : {"z", "r", "h"}) {
    params_.add_xavier(std::string("ggnn.gru.w_") + gate, {d, d}, rng);
    params_.add_xavier(std::string("ggnn.gru.u_") + gate, {d, d}, rng);
    params_.add_zeros(std::string("ggnn.gru.b_") + gate, {d});
  }

  params_.add_xavier("fuse.w1", {d, d}, rng);
  params_.add_xavier("fuse.w2", {d, d}, rng);
  params_.add_zeros("fuse.b", {d});

  pool("user.item_pool");
  msa("user.msa", d);
  pool("user.pool");

  msa("cand.entity_msa", dims_.entity_dim);
  pool("cand.entity_pool");
  pool("cand.pool");
}

num::AttentionPoolParams LicmModel::pool(const std::string& prefix) const {
  return {params_.get(prefix + ".proj"), params_.get(prefix + ".query")};
}

num::MsaParams LicmModel::msa(const std::string& prefix) const {
  return {params_.get(prefix + ".wq"), params_.get(prefix + ".wk"), params_.get(prefix + ".wv"),
          config_.heads};
}

Tensor LicmModel::maybe_dropout(const Tensor& t, ForwardContext& ctx) const {
  if (!ctx.training() || config_.dropout <= 0.0) return t;
  return num::dropout(t, config_.dropout, ctx.rng());
}

num::PoolResult LicmModel::audited_pool(const Tensor& values, const std::string& prefix,
                                        const std::vector<bool>& mask, ForwardContext& ctx) const {
  auto res = num::attention_pool(values, pool(prefix), mask);
  ctx.audit(ForwardContext::Probe::kAttention, res.weights);
  return res;
}

namespace {

Tensor table_rows(const data::EmbeddingTable& table, std::span<const std::int32_t> ids) {
  std::vector<double> values;
  values.reserve(ids.size() * table.dim());
  for (auto id : ids) {
    const auto r = table.row(id);
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor::matrix(ids.size(), table.dim(), std::move(values));
}

}  // namespace

Tensor LicmModel::entity_tower(std::span<const std::int32_t> ids, const data::EmbeddingTable& table,
                               const std::string& prefix, ForwardContext& ctx) const {
  const Tensor x = table_rows(table, ids);
  auto attn = num::multi_head_self_attention(x, msa(prefix + "_msa"));
  for (const auto& a : attn.attention) ctx.audit(ForwardContext::Probe::kAttention, a);
  const Tensor xe = maybe_dropout(attn.output, ctx);
  return audited_pool(xe, prefix + "_pool", std::vector<bool>(ids.size(), true), ctx).output;
}

NewsRepr LicmModel::encode_news(const data::NewsArticle& article, const data::EmbeddingTable& words,
                                const data::EmbeddingTable& entities, ForwardContext& ctx) const {
  NewsRepr r;
  const std::size_t t = article.title_tokens.size();
  r.has_title = t > 0;
  r.has_entities = !article.entities.empty();
  if (r.has_title) {
    const Tensor x = table_rows(words, article.title_tokens);
    auto attn = num::multi_head_self_attention(x, msa("news.msa"));
    for (const auto& a : attn.attention) ctx.audit(ForwardContext::Probe::kAttention, a);
    const Tensor words_ctx = maybe_dropout(attn.output, ctx);
    const std::vector<std::int32_t> cat(t, article.category), sub(t, article.subcategory);
    const Tensor mixed_in = num::concat_cols({words_ctx, num::gather_rows(p("news.category"), cat),
                                              num::gather_rows(p("news.subcategory"), sub)});
    r.c_n = num::add_bias(num::matmul(mixed_in, p("news.mix.w")), p("news.mix.b"));
    r.h_ln = audited_pool(r.c_n, "news.pool", std::vector<bool>(t, true), ctx).output;
  } else {
    r.h_ln = zero_vector();
  }
  if (r.has_entities) {
    const Tensor x = table_rows(entities, article.entities);
    auto attn = num::multi_head_self_attention(x, msa("entity.msa"));
    for (const auto& a : attn.attention) ctx.audit(ForwardContext::Probe::kAttention, a);
    const Tensor xe = maybe_dropout(attn.output, ctx);
    r.h_le = audited_pool(xe, "entity.pool", std::vector<bool>(article.entities.size(), true), ctx)
                 .output;
  } else {
    r.h_le = zero_vector();
  }
  return r;
}

Tensor LicmModel::encode_chain_news(std::span<const Tensor> node_vectors, ForwardContext& ctx) const {
  if (node_vectors.empty()) return zero_vector();
  const Tensor values = num::stack_rows({node_vectors.begin(), node_vectors.end()});
  return audited_pool(values, "chain.news_pool", std::vector<bool>(node_vectors.size(), true), ctx)
      .output;
}

Tensor LicmModel::encode_chain_user(std::span<const Tensor> chain_vectors,
                                    const std::vector<bool>& valid, ForwardContext& ctx) const {
  if (chain_vectors.size() != valid.size()) {
    throw std::invalid_argument("encode_chain_user: mask length mismatch");
  }
  if (std::none_of(valid.begin(), valid.end(), [](bool v) { return v; })) return zero_vector();
  const Tensor values = num::stack_rows({chain_vectors.begin(), chain_vectors.end()});
  return audited_pool(values, "chain.user_pool", valid, ctx).output;
}

Tensor LicmModel::encode_neighbors(const num::SparseMatrix& adjacency, const Tensor& initial,
                                   std::size_t layers) const {
  Tensor h = initial;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor m = num::matmul(num::spmm(adjacency, h), p("ggnn.w_g"));
    const Tensor z = num::sigmoid(num::add_bias(
        num::add(num::matmul(m, p("ggnn.gru.w_z")), num::matmul(h, p("ggnn.gru.u_z"))),
        p("ggnn.gru.b_z")));
    const Tensor r = num::sigmoid(num::add_bias(
        num::add(num::matmul(m, p("ggnn.gru.w_r")), num::matmul(h, p("ggnn.gru.u_r"))),
        p("ggnn.gru.b_r")));
    const Tensor cand = num::tanh(num::add_bias(
        num::add(num::matmul(m, p("ggnn.gru.w_h")), num::matmul(num::mul(r, h), p("ggnn.gru.u_h"))),
        p("ggnn.gru.b_h")));
    h = num::add(num::mul(num::one_minus(z), h), num::mul(z, cand));
  }
  return h;
}

FuseResult LicmModel::fuse(const Tensor& neighbor, const Tensor& chain, ForwardContext& ctx) const {
  if (neighbor.size() != chain.size()) {
    throw num::DimensionError("fuse: " + num::shape_str(neighbor.shape()) + " vs " +
                              num::shape_str(chain.shape()));
  }
  const Tensor pre = num::add(num::add(num::matmul(neighbor, p("fuse.w1")), num::matmul(chain, p("fuse.w2"))),
                              p("fuse.b"));
  Tensor gate = num::sigmoid(pre);
  ctx.audit(ForwardContext::Probe::kGate, gate);
  Tensor out = num::add(num::mul(num::one_minus(gate), neighbor), num::mul(gate, chain));
  return {std::move(out), std::move(gate)};
}

Tensor LicmModel::aggregate_user(std::span<const HistoryItem> items, ForwardContext& ctx) const {
  if (items.empty()) return zero_vector();
  std::vector<Tensor> per_item;
  per_item.reserve(items.size());
  for (const auto& item : items) {
    const Tensor parts = num::stack_rows({item.news->h_ln, item.news->h_le, item.fused});
    const std::vector<bool> mask{item.news->has_title, item.news->has_entities, true};
    per_item.push_back(audited_pool(parts, "user.item_pool", mask, ctx).output);
  }
  const Tensor seq = num::stack_rows(per_item);
  auto attn = num::multi_head_self_attention(seq, msa("user.msa"));
  for (const auto& a : attn.attention) ctx.audit(ForwardContext::Probe::kAttention, a);
  const Tensor ctx_seq = maybe_dropout(attn.output, ctx);
  return audited_pool(ctx_seq, "user.pool", std::vector<bool>(items.size(), true), ctx).output;
}

UserRepr LicmModel::encode_user(std::span<const graph::NodeId> history,
                                const graph::NeighborSubgraph& subgraph,
                                const chain::ChainCache& chains, NewsReprCache& news,
                                ForwardContext& ctx) const {
  UserRepr u;
  if (history.empty()) {
    u.cold = true;
    u.chain_user = zero_vector();
    u.emb_user = zero_vector();
    return u;
  }
  if (subgraph.history_slots.size() != history.size()) {
    throw std::invalid_argument("encode_user: subgraph was built for a different history");
  }

  std::vector<Tensor> initial;
  initial.reserve(subgraph.nodes.size());
  for (auto n : subgraph.nodes) initial.push_back(news.get(n).h_ln);
  const Tensor states =
      encode_neighbors(neighbor_adjacency(subgraph), num::stack_rows(initial), config_.ggnn_layers);

  std::vector<bool> chain_valid;
  std::vector<HistoryItem> items;
  for (std::size_t t = 0; t < history.size(); ++t) {
    u.neighbor.push_back(num::row(states, subgraph.history_slots[t]));
    if (config_.use_chain) {
      std::vector<Tensor> nodes;
      if (chains.contains(history[t])) {
        for (auto n : chains.get(history[t]).nodes) nodes.push_back(news.get(n).h_ln);
      }
      chain_valid.push_back(!nodes.empty());
      u.chain.push_back(encode_chain_news(nodes, ctx));
      u.fused.push_back(fuse(u.neighbor.back(), u.chain.back(), ctx).output);
    } else {
      u.fused.push_back(u.neighbor.back());
    }
    items.push_back({&news.get(history[t]), u.fused.back()});
  }
  u.emb_user = aggregate_user(items, ctx);
  if (config_.use_chain) {
    u.chain_user = encode_chain_user(u.chain, chain_valid, ctx);
    u.emb_user = num::add(u.emb_user, u.chain_user);
  } else {
    u.chain_user = zero_vector();
  }
  return u;
}

CandidateRepr LicmModel::encode_candidate(const NewsRepr& news,
                                          std::span<const graph::NodeId> neighbor_entities,
                                          const data::EmbeddingTable& entities,
                                          ForwardContext& ctx) const {
  CandidateRepr c;
  c.h_ln = news.h_ln;
  c.h_le = news.h_le;
  const bool has_ge = !neighbor_entities.empty();
  c.h_ge = has_ge ? entity_tower(neighbor_entities, entities, "cand.entity", ctx) : zero_vector();
  const std::vector<bool> mask{news.has_title, news.has_entities, has_ge};
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    c.emb_cand = zero_vector();
    return c;
  }
  c.emb_cand = audited_pool(num::stack_rows({c.h_ln, c.h_le, c.h_ge}), "cand.pool", mask, ctx).output;
  return c;
}

CandidateRepr LicmModel::encode_candidate(const data::NewsArticle& article,
                                          const graph::EntityGraph& entity_graph, std::size_t m_e,
                                          const data::Bundle& bundle, ForwardContext& ctx) const {
  const NewsRepr news = encode_news(article, bundle.word_embeddings, bundle.entity_embeddings, ctx);
  const auto nbrs = graph::top_entity_neighbors(entity_graph, article.entities, m_e);
  return encode_candidate(news, nbrs, bundle.entity_embeddings, ctx);
}

}  // namespace licm::enc

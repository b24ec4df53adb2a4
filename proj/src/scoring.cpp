#include "licm/scoring.hpp"

#include <algorithm>
#include <thread>

namespace licm {

std::vector<enc::NewsRepr> encode_all_news(const enc::LicmModel& model, const data::Bundle& bundle,
                                           std::size_t threads) {
  const std::size_t n = bundle.corpus.num_news();
  std::vector<enc::NewsRepr> out(n);
  threads = std::max<std::size_t>(1, std::min(threads, n));
  auto work = [&](std::size_t t) {
    num::NoGradGuard no_grad;
    enc::ForwardContext ctx;
    for (std::size_t i = t; i < n; i += threads) {
      out[i] = model.encode_news(bundle.corpus.articles[i], bundle.word_embeddings,
                                 bundle.entity_embeddings, ctx);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return out;
}

chain::NewsVectors chain_vectors(std::span<const enc::NewsRepr> news, std::size_t dim) {
  std::vector<double> values;
  values.reserve(news.size() * dim);
  for (const auto& r : news) values.insert(values.end(), r.h_ln.data().begin(), r.h_ln.data().end());
  return chain::NewsVectors(news.size(), dim, std::move(values));
}

chain::NewsVectors title_vectors(const data::Bundle& bundle) {
  const std::size_t dim = bundle.word_embeddings.dim();
  chain::NewsVectors out(bundle.corpus.num_news(), dim);
  for (std::size_t i = 0; i < bundle.corpus.num_news(); ++i) {
    const auto& tokens = bundle.corpus.articles[i].title_tokens;
    if (tokens.empty()) continue;
    auto row = out.mutable_row(static_cast<std::int32_t>(i));
    for (auto w : tokens) {
      const auto src = bundle.word_embeddings.row(w);
      for (std::size_t k = 0; k < dim; ++k) row[k] += src[k];
    }
    for (auto& v : row) v /= static_cast<double>(tokens.size());
  }
  return out;
}

std::vector<NodeId> history_origins(const data::Bundle& bundle) {
  std::vector<NodeId> out;
  for (const auto& imp : bundle.impressions) out.insert(out.end(), imp.history.begin(), imp.history.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

enc::UserRepr ImpressionScorer::user(std::span<const NodeId> history,
                                     const graph::NeighborSubgraph* subgraph) {
  if (history.empty()) {
    return model_.encode_user(history, graph::NeighborSubgraph{}, chains_, news_, ctx_);
  }
  graph::NeighborSubgraph local;
  if (subgraph == nullptr) {
    local = graph::extract_neighbor_subgraph(graphs_.news, history, config_.m_n, config_.n_hops);
    subgraph = &local;
  }
  return model_.encode_user(history, *subgraph, chains_, news_, ctx_);
}

const num::Tensor& ImpressionScorer::candidate(NodeId news) {
  auto it = candidates_.find(news);
  if (it != candidates_.end()) return it->second;
  const auto& article = bundle_.corpus.article(news);
  const auto nbrs = graph::top_entity_neighbors(graphs_.entities, article.entities, config_.m_e);
  auto repr = model_.encode_candidate(news_.get(news), nbrs, bundle_.entity_embeddings, ctx_);
  return candidates_.emplace(news, std::move(repr.emb_cand)).first->second;
}

num::Tensor ImpressionScorer::scores(const enc::UserRepr& user, std::span<const NodeId> candidates) {
  std::vector<num::Tensor> rows;
  rows.reserve(candidates.size());
  for (auto c : candidates) rows.push_back(candidate(c));
  return num::matmul_nt(user.emb_user, num::stack_rows(rows));
}

}  // namespace licm

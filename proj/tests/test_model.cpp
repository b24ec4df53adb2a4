#include <gtest/gtest.h>

#include <cmath>

#include "licm/model.hpp"
#include "licm/scoring.hpp"
#include "licm/training.hpp"
#include "support.hpp"

namespace licm::enc {
namespace {

using num::Tensor;
using testing::tiny_bundle;
using testing::tiny_config;

struct Fixture {
  RunConfig config = tiny_config();
  data::Bundle bundle = tiny_bundle();
  graph::GraphSnapshot graphs = testing::snapshot_of(bundle, config);
  LicmModel model{ModelConfig::from(config), ModelDims::from(bundle), 5};
  chain::ChainCache chains;

  Fixture() { refresh(); }
  void refresh() {
    const auto news = encode_all_news(model, bundle);
    chains.rebuild(graphs.news, history_origins(bundle), chain_vectors(news, config.d),
                   config.chain_config());
  }
  const data::IndexedImpression& first_with_history() const {
    for (const auto& imp : bundle.impressions)
      if (imp.history.size() >= 2) return imp;
    throw std::logic_error("fixture has no history");
  }
};

void expect_close(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << "index " << i;
}

TEST(ModelConfig, RejectsIndivisibleHeads) {
  auto c = tiny_config();
  c.heads = 3;
  EXPECT_THROW(LicmModel(ModelConfig::from(c), ModelDims{}, 1), std::invalid_argument);
}

TEST(ModelInit, DeterministicPerSeed) {
  Fixture f;
  LicmModel other(f.model.config(), f.model.dims(), 5), third(f.model.config(), f.model.dims(), 6);
  for (const auto& [name, t] : f.model.params().all()) {
    EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), other.params().get(name).data().begin())) << name;
  }
  EXPECT_FALSE(std::equal(f.model.params().get("ggnn.w_g").data().begin(), f.model.params().get("ggnn.w_g").data().end(),
                          third.params().get("ggnn.w_g").data().begin()));
}

TEST(NewsEncoder, MatchesCompositionOracle) {
  Fixture f;
  ForwardContext ctx;
  const auto& art = f.bundle.corpus.articles[1];
  const auto r = f.model.encode_news(art, f.bundle.word_embeddings, f.bundle.entity_embeddings, ctx);
  const auto& p = f.model.params();
  std::vector<double> rows;
  for (auto w : art.title_tokens) {
    const auto row = f.bundle.word_embeddings.row(w);
    rows.insert(rows.end(), row.begin(), row.end());
  }
  const auto x = Tensor::matrix(art.title_tokens.size(), f.bundle.word_embeddings.dim(), rows);
  const auto words = num::multi_head_self_attention(
      x, {p.get("news.msa.wq"), p.get("news.msa.wk"), p.get("news.msa.wv"), f.config.heads});
  const std::size_t t = art.title_tokens.size();
  const auto cat = num::repeat_rows(num::row(p.get("news.category"), art.category), t);
  const auto sub = num::repeat_rows(num::row(p.get("news.subcategory"), art.subcategory), t);
  const auto mixed = num::add_bias(num::matmul(num::concat_cols({words.output, cat, sub}), p.get("news.mix.w")),
                                   p.get("news.mix.b"));
  const auto h = num::attention_pool(mixed, {p.get("news.pool.proj"), p.get("news.pool.query")}).output;
  expect_close(r.h_ln, h, 1e-13);
  EXPECT_TRUE(r.has_title);
}

TEST(NewsEncoder, EmptyTitleAndNoEntitiesGiveZeros) {
  Fixture f;
  ForwardContext ctx;
  data::NewsArticle empty;
  empty.empty_title = true;
  const auto r = f.model.encode_news(empty, f.bundle.word_embeddings, f.bundle.entity_embeddings, ctx);
  EXPECT_FALSE(r.has_title);
  EXPECT_FALSE(r.has_entities);
  for (double v : r.h_ln.data()) EXPECT_EQ(v, 0.0);
  for (double v : r.h_le.data()) EXPECT_EQ(v, 0.0);
}

TEST(ChainEncoder, EmptyChainIsZeroAndSingleNodeIsIdentity) {
  Fixture f;
  ForwardContext ctx;
  const auto empty = f.model.encode_chain_news({}, ctx);
  for (double v : empty.data()) EXPECT_EQ(v, 0.0);
  const auto x = Tensor::vector({1, 2, 3, 4, 5, 6, 7, 8});
  const std::vector<Tensor> one{x};
  expect_close(f.model.encode_chain_news(one, ctx), x, 0.0);
  const std::vector<Tensor> two{x, f.model.zero_vector()};
  expect_close(f.model.encode_chain_user(two, {true, false}, ctx), x, 0.0);
  const auto none = f.model.encode_chain_user(two, {false, false}, ctx);
  for (double v : none.data()) EXPECT_EQ(v, 0.0);
}

TEST(Ggnn, ZeroLayersIsIdentity) {
  Fixture f;
  Rng rng(1);
  const auto h = testing::random_tensor({3, 8}, rng, 1.0, false);
  graph::NeighborSubgraph s;
  s.nodes = {1, 2, 3};
  s.local_edges = {{0, 1}, {1, 2}};
  const auto out = f.model.encode_neighbors(neighbor_adjacency(s), h, 0);
  expect_close(out, h, 0.0);
}

TEST(Ggnn, OneLayerMatchesGruOracle) {
  Fixture f;
  Rng rng(2);
  const auto h = testing::random_tensor({3, 8}, rng, 1.0, false);
  graph::NeighborSubgraph s;
  s.nodes = {1, 2, 3};
  s.local_edges = {{0, 1}, {0, 1}, {2, 2}};
  const auto out = f.model.encode_neighbors(neighbor_adjacency(s), h, 1);
  const auto& p = f.model.params();
  auto mat = [&](const char* n) { return p.get(n); };
  const std::size_t d = 8;
  auto vm = [&](const std::vector<double>& v, const Tensor& w) {
    std::vector<double> o(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) o[j] += v[k] * w.at(k, j);
    return o;
  };
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  // Undirected, deduplicated, no self loops: 0-1 only.
  const std::vector<std::vector<std::size_t>> nbr{{1}, {0}, {}};
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> agg(d, 0.0), hi(d);
    for (std::size_t k = 0; k < d; ++k) hi[k] = h.at(i, k);
    for (auto j : nbr[i])
      for (std::size_t k = 0; k < d; ++k) agg[k] += h.at(j, k);
    const auto m = vm(agg, mat("ggnn.w_g"));
    const auto mz = vm(m, mat("ggnn.gru.w_z")), hz = vm(hi, mat("ggnn.gru.u_z"));
    const auto mr = vm(m, mat("ggnn.gru.w_r")), hr = vm(hi, mat("ggnn.gru.u_r"));
    std::vector<double> z(d), r(d), rh(d);
    for (std::size_t k = 0; k < d; ++k) {
      z[k] = sig(mz[k] + hz[k] + mat("ggnn.gru.b_z").at(k));
      r[k] = sig(mr[k] + hr[k] + mat("ggnn.gru.b_r").at(k));
      rh[k] = r[k] * hi[k];
    }
    const auto mh = vm(m, mat("ggnn.gru.w_h")), uh = vm(rh, mat("ggnn.gru.u_h"));
    for (std::size_t k = 0; k < d; ++k) {
      const double cand = std::tanh(mh[k] + uh[k] + mat("ggnn.gru.b_h").at(k));
      EXPECT_NEAR(out.at(i, k), (1 - z[k]) * hi[k] + z[k] * cand, 1e-13);
    }
  }
}

TEST(Fuse, GateInOpenUnitIntervalAndMeanAtHalf) {
  Fixture f;
  ForwardContext ctx;
  Rng rng(3);
  const auto n = testing::random_tensor({8}, rng, 1.0, false), l = testing::random_tensor({8}, rng, 1.0, false);
  const auto r = f.model.fuse(n, l, ctx);
  for (double g : r.gate.data()) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
  for (const char* name : {"fuse.w1", "fuse.w2", "fuse.b"}) {
    auto& t = f.model.params().all().at(name);
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
  }
  const auto half = f.model.fuse(n, l, ctx);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(half.gate.at(i), 0.5);
    EXPECT_EQ(half.output.at(i), (n.at(i) + l.at(i)) / 2.0);
  }
  EXPECT_THROW(f.model.fuse(n, Tensor::zeros({3}), ctx), num::DimensionError);
}

TEST(UserEncoder, ColdUserIsZero) {
  Fixture f;
  ForwardContext ctx;
  NewsReprCache cache(f.model, f.bundle, ctx);
  const auto u = f.model.encode_user({}, {}, f.chains, cache, ctx);
  EXPECT_TRUE(u.cold);
  for (double v : u.emb_user.data()) EXPECT_EQ(v, 0.0);
}

TEST(UserEncoder, AblationSkipsChains) {
  Fixture f;
  f.model.mutable_config().use_chain = false;
  ForwardContext ctx;
  NewsReprCache cache(f.model, f.bundle, ctx);
  const auto& imp = f.first_with_history();
  const auto sg = graph::extract_neighbor_subgraph(f.graphs.news, imp.history, f.config.m_n, f.config.n_hops);
  const auto u = f.model.encode_user(imp.history, sg, chain::ChainCache{}, cache, ctx);
  ASSERT_EQ(u.fused.size(), imp.history.size());
  for (std::size_t t = 0; t < u.fused.size(); ++t) expect_close(u.fused[t], u.neighbor[t], 0.0);
  for (double v : u.chain_user.data()) EXPECT_EQ(v, 0.0);
}

TEST(UserEncoder, EveryAttentionAndGateIsNormalized) {
  Fixture f;
  ForwardContext ctx;
  std::size_t attn = 0, gates = 0;
  ctx.set_auditor([&](ForwardContext::Probe p, const Tensor& t) {
    if (p == ForwardContext::Probe::kGate) {
      ++gates;
      for (double g : t.data()) {
        EXPECT_GT(g, 0.0);
        EXPECT_LT(g, 1.0);
      }
      return;
    }
    ++attn;
    const std::size_t rows = t.ndim() == 2 ? t.rows() : 1, cols = t.ndim() == 2 ? t.cols() : t.size();
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        EXPECT_GE(t.data()[r * cols + c], 0.0);
        total += t.data()[r * cols + c];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  });
  NewsReprCache cache(f.model, f.bundle, ctx);
  ImpressionScorer scorer(f.model, f.bundle, f.graphs, f.config, f.chains, cache, ctx);
  for (const auto& imp : f.bundle.impressions) {
    const auto u = scorer.user(imp.history);
    std::vector<NodeId> cands;
    for (const auto& c : imp.candidates) cands.push_back(c.news);
    scorer.scores(u, cands);
  }
  EXPECT_GT(attn, 100u);
  EXPECT_GT(gates, 10u);
}

TEST(CandidateEncoder, TitleOnlyCandidateUsesTitle) {
  Fixture f;
  ForwardContext ctx;
  data::NewsArticle art = f.bundle.corpus.articles[1];
  art.entities.clear();
  const auto news = f.model.encode_news(art, f.bundle.word_embeddings, f.bundle.entity_embeddings, ctx);
  const auto c = f.model.encode_candidate(news, {}, f.bundle.entity_embeddings, ctx);
  expect_close(c.emb_cand, news.h_ln, 0.0);
  const auto with_graph = f.model.encode_candidate(art, f.graphs.entities, 0, f.bundle, ctx);
  for (double v : with_graph.h_ge.data()) EXPECT_EQ(v, 0.0);
}

TEST(NewsReprCache, MemoizesPerForward) {
  Fixture f;
  ForwardContext ctx;
  NewsReprCache cache(f.model, f.bundle, ctx);
  const auto& a = cache.get(3);
  const auto& b = cache.get(3);
  EXPECT_EQ(&a, &b);
  EXPECT_EQ(cache.size(), 1u);
}

// Scalar training loss over a tiny batch with chains and dropout disabled.
Tensor batch_loss(const Fixture& f, const std::vector<train::TrainingSample>& samples,
                  std::span<const data::IndexedImpression* const> imps) {
  ForwardContext ctx;
  NewsReprCache cache(f.model, f.bundle, ctx);
  ImpressionScorer scorer(f.model, f.bundle, f.graphs, f.config, f.chains, cache, ctx);
  std::vector<Tensor> losses;
  for (const auto& s : samples) {
    const auto u = scorer.user(imps[s.impression]->history);
    std::vector<NodeId> cands{s.positive};
    cands.insert(cands.end(), s.negatives.begin(), s.negatives.end());
    losses.push_back(train::nce_loss(scorer.scores(u, cands)));
  }
  return num::sum(num::stack_rows(losses));
}

TEST(Gradients, EveryParameterGroupMatchesFiniteDifferences) {
  Fixture f;
  const auto imps = f.bundle.split(data::Split::kTrain);
  auto set = train::build_samples(imps, f.config.k_neg, 1);
  set.samples.resize(2);
  std::vector<Tensor> leaves;
  std::vector<std::string> names;
  for (auto& [name, t] : f.model.params().all()) {
    leaves.push_back(t);
    names.push_back(name);
  }
  const auto res = testing::check_gradients([&] { return batch_loss(f, set.samples, imps); }, leaves);
  for (std::size_t i = 0; i < names.size(); ++i) EXPECT_LT(res.errors[i], 1e-4) << names[i];
}

}  // namespace
}  // namespace licm::enc

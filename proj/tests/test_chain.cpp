#include <gtest/gtest.h>

#include "licm/chain.hpp"
#include "licm/random.hpp"
#include "reference_walk.hpp"

namespace licm::chain {
namespace {

NewsVectors table(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return NewsVectors(rows.size(), rows.empty() ? 0 : rows[0].size(), flat);
}

TEST(Cosine, BasicsAndZeroNorm) {
  const std::vector<double> a{1, 0}, b{0, 2}, c{3, 0}, z{0, 0};
  EXPECT_DOUBLE_EQ(cosine(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine(a, c), 1.0);
  EXPECT_DOUBLE_EQ(cosine(a, z), -1.0);
}

TEST(WalkChain, TwoNodeCycleLoops) {
  // A=1, B=2: A->B and B->A are the only edges.
  const graph::NewsGraph g(3, {{{1, 2}, 1}, {{2, 1}, 1}});
  const auto v = table({{0, 0}, {1, 0}, {0, 1}});
  const auto ch = walk_chain(g, 1, v, {.top_n = 3, .max_hops = 4});
  EXPECT_EQ(ch.nodes, (std::vector<NodeId>{2, 1, 2, 1}));
  EXPECT_EQ(ch.weights, (std::vector<std::uint32_t>{1, 1, 1, 1}));
}

TEST(WalkChain, LinearPathStopsAtSink) {
  const graph::NewsGraph g(4, {{{1, 2}, 1}, {{2, 3}, 1}});
  const auto v = table({{0}, {1}, {1}, {1}});
  const auto ch = walk_chain(g, 1, v, {.top_n = 3, .max_hops = 8});
  EXPECT_EQ(ch.nodes, (std::vector<NodeId>{2, 3}));
  EXPECT_EQ(ch.valid_len(), 2u);
  EXPECT_EQ(ch.padded(4), (std::vector<NodeId>{2, 3, data::kPad, data::kPad}));
  EXPECT_EQ(ch.mask(3), (std::vector<bool>{true, true, false}));
}

TEST(WalkChain, PrefersSimilarAmongTopN) {
  // From 1: heavy edge to 2 (dissimilar) and lighter edge to 3 (similar).
  const graph::NewsGraph g(5, {{{1, 2}, 5}, {{1, 3}, 2}, {{1, 4}, 1}});
  const auto v = table({{0, 0}, {1, 0}, {0, 1}, {1, 0.1}, {1, 0}});
  EXPECT_EQ(walk_chain(g, 1, v, {.top_n = 2, .max_hops = 1}).nodes, (std::vector<NodeId>{3}));
  EXPECT_EQ(walk_chain(g, 1, v, {.top_n = 1, .max_hops = 1}).nodes, (std::vector<NodeId>{2}));
  EXPECT_EQ(walk_chain(g, 1, v, {.top_n = 3, .max_hops = 1}).nodes, (std::vector<NodeId>{4}));
}

TEST(WalkChain, TiesGoToSmallestId) {
  const graph::NewsGraph g(4, {{{1, 3}, 1}, {{1, 2}, 1}});
  const auto v = table({{0}, {1}, {1}, {1}});
  EXPECT_EQ(walk_chain(g, 1, v, {.top_n = 2, .max_hops = 1}).nodes, (std::vector<NodeId>{2}));
}

TEST(WalkChain, IsolatedOrUnknownOriginGivesEmptyChain) {
  const graph::NewsGraph g(3, {{{1, 2}, 1}});
  const auto v = table({{1}, {1}, {1}});
  EXPECT_TRUE(walk_chain(g, 2, v, {}).nodes.empty());
  EXPECT_TRUE(walk_chain(g, 99, v, {}).nodes.empty());
}

TEST(WalkChain, TopOneIsGreedyByWeight) {
  Rng rng(31);
  graph::EdgeWeights w;
  for (int e = 0; e < 60; ++e) w[{static_cast<NodeId>(rng.below(12)), static_cast<NodeId>(rng.below(12))}] = 1 + rng.below(5);
  const graph::NewsGraph g(12, w);
  std::vector<std::vector<double>> rows(12, std::vector<double>(3));
  for (auto& r : rows)
    for (auto& x : r) x = rng.normal();
  const auto v = table(rows);
  for (NodeId o = 0; o < 12; ++o) {
    const auto ch = walk_chain(g, o, v, {.top_n = 1, .max_hops = 6});
    NodeId cur = o;
    for (NodeId n : ch.nodes) {
      EXPECT_EQ(n, g.out_neighbors(cur)[0].node);
      cur = n;
    }
  }
}

TEST(WalkChain, AgreesWithReferenceOnRandomGraphs) {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(20);
    graph::EdgeWeights w;
    for (std::size_t e = 0; e < 3 * n; ++e) w[{static_cast<NodeId>(rng.below(n)), static_cast<NodeId>(rng.below(n))}] = 1 + rng.below(3);
    std::vector<std::vector<double>> rows(n, std::vector<double>(2));
    for (auto& r : rows)
      for (auto& x : r) x = static_cast<double>(rng.below(3)) - 1.0;  // coarse values force ties
    const graph::NewsGraph g(n, w);
    const auto v = table(rows);
    const std::size_t top_n = 1 + rng.below(4);
    for (NodeId o = 0; o < static_cast<NodeId>(n); ++o) {
      EXPECT_EQ(walk_chain(g, o, v, {.top_n = top_n, .max_hops = 8}).nodes,
                testing::reference_walk(w, rows, o, top_n, 8));
    }
  }
}

TEST(WalkChain, RollingContextComparesAgainstCurrentNode) {
  // From 1 the candidates are 2 and 3; 3 resembles 1. From 3 the candidates
  // are 4 (resembles 3) and 5 (resembles 1).
  const graph::NewsGraph g(6, {{{1, 2}, 1}, {{1, 3}, 1}, {{3, 4}, 1}, {{3, 5}, 1}});
  const auto v = table({{0, 0}, {1, 0}, {-1, 0}, {1, 1}, {0, 1}, {1, -0.1}});
  EXPECT_EQ(walk_chain(g, 1, v, {.top_n = 2, .max_hops = 2}).nodes, (std::vector<NodeId>{3, 5}));
  EXPECT_EQ(walk_chain(g, 1, v, {.top_n = 2, .max_hops = 2, .context = SimilarityContext::kRolling}).nodes,
            (std::vector<NodeId>{3, 4}));
}

TEST(ChainCache, IndependentOfThreadCount) {
  Rng rng(33);
  graph::EdgeWeights w;
  for (int e = 0; e < 200; ++e) w[{static_cast<NodeId>(rng.below(40)), static_cast<NodeId>(rng.below(40))}] = 1 + rng.below(5);
  const graph::NewsGraph g(40, w);
  std::vector<std::vector<double>> rows(40, std::vector<double>(4));
  for (auto& r : rows)
    for (auto& x : r) x = rng.normal();
  const auto v = table(rows);
  std::vector<NodeId> origins;
  for (int i = 0; i < 60; ++i) origins.push_back(static_cast<NodeId>(rng.below(40)));
  ChainCache one, four;
  one.rebuild(g, origins, v, {}, 1);
  four.rebuild(g, origins, v, {}, 4);
  ASSERT_EQ(one.size(), four.size());
  for (NodeId o : origins) EXPECT_EQ(one.get(o), four.get(o));
  EXPECT_THROW(one.get(1000), std::out_of_range);
}

TEST(ChainConfig, Validates) {
  EXPECT_THROW((ChainConfig{.top_n = 0}.validate()), std::invalid_argument);
  EXPECT_THROW((ChainConfig{.top_n = 1, .max_hops = 0}.validate()), std::invalid_argument);
}

}  // namespace
}  // namespace licm::chain

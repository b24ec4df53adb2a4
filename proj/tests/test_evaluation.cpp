#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "licm/checkpoint.hpp"
#include "licm/evaluation.hpp"
#include "support.hpp"

namespace licm::eval {
namespace {

double auc_pairs(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] && !l[j]) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

// Rank of item i: 1 + number of items placed before it.
std::size_t rank_of(const std::vector<double>& s, std::size_t i) {
  std::size_t r = 1;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++r;
  return r;
}

TEST(Auc, Examples) {
  const std::vector<double> s{0.9, 0.8, 0.1, 0.2};
  EXPECT_EQ(*auc(s, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(*auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}), 0.5);
  EXPECT_EQ(*auc(s, std::vector<int>{0, 0, 1, 1}), 0.0);
  EXPECT_FALSE(auc(s, std::vector<int>{1, 1, 1, 1}).has_value());
  EXPECT_FALSE(auc(s, std::vector<int>{0, 0, 0, 0}).has_value());
  EXPECT_THROW(auc(s, std::vector<int>{1}), std::invalid_argument);
}

TEST(Mrr, Examples) {
  EXPECT_EQ(*mrr(std::vector<double>{3, 2, 1}, std::vector<int>{1, 0, 0}), 1.0);
  EXPECT_EQ(*mrr(std::vector<double>{4, 3, 2, 1}, std::vector<int>{0, 0, 0, 1}), 0.25);
  // Tie: candidate 0 ranks before candidate 1.
  EXPECT_EQ(*mrr(std::vector<double>{1, 1}, std::vector<int>{0, 1}), 0.5);
  EXPECT_FALSE(mrr(std::vector<double>{1, 2}, std::vector<int>{0, 0}).has_value());
}

TEST(Ndcg, Examples) {
  EXPECT_EQ(*ndcg_at_k(std::vector<double>{3, 2, 1}, std::vector<int>{1, 0, 0}, 5), 1.0);
  std::vector<double> s{6, 5, 4, 3, 2, 1};
  EXPECT_EQ(*ndcg_at_k(s, std::vector<int>{0, 0, 0, 0, 0, 1}, 5), 0.0);
  EXPECT_NEAR(*ndcg_at_k(s, std::vector<int>{0, 1, 0, 0, 0, 0}, 5), 1.0 / std::log2(3.0), 1e-15);
}

TEST(Metrics, MatchBruteForceOnRandomImpressions) {
  Rng rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(14);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (auto& x : s) x = static_cast<double>(rng.below(6));  // coarse scores produce ties
    for (auto& y : l) y = rng.bernoulli(0.3);
    l[0] = 1;
    l[1] = 0;
    EXPECT_NEAR(*auc(s, l), auc_pairs(s, l), 1e-12);
    double rr = 0, npos = 0, dcg5 = 0, dcg10 = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (l[i]) {
        const auto r = rank_of(s, i);
        rr += 1.0 / r;
        npos += 1;
        if (r <= 5) dcg5 += 1.0 / std::log2(r + 1.0);
        if (r <= 10) dcg10 += 1.0 / std::log2(r + 1.0);
      }
    double ideal5 = 0, ideal10 = 0;
    for (std::size_t r = 1; r <= npos; ++r) {
      if (r <= 5) ideal5 += 1.0 / std::log2(r + 1.0);
      if (r <= 10) ideal10 += 1.0 / std::log2(r + 1.0);
    }
    EXPECT_NEAR(*mrr(s, l), rr / npos, 1e-12);
    EXPECT_NEAR(*ndcg_at_k(s, l, 5), dcg5 / ideal5, 1e-12);
    EXPECT_NEAR(*ndcg_at_k(s, l, 10), dcg10 / ideal10, 1e-12);
  }
}

TEST(Metrics, InvariantUnderMonotoneTransform) {
  Rng rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(8), t(8);
    std::vector<int> l(8, 0);
    for (auto& x : s) x = rng.normal();
    for (std::size_t i = 0; i < 8; ++i) t[i] = std::exp(3 * s[i]) + 1;
    l[rng.below(8)] = 1;
    l[(rng.below(7) + 1) % 8] = 1;
    if (std::all_of(l.begin(), l.end(), [](int v) { return v; })) continue;
    EXPECT_NEAR(*auc(s, l), *auc(t, l), 1e-15);
    EXPECT_EQ(*mrr(s, l), *mrr(t, l));
    EXPECT_EQ(*ndcg_at_k(s, l, 5), *ndcg_at_k(t, l, 5));
  }
}

TEST(Summarize, MacroAverageWithExclusions) {
  std::vector<ScoredImpression> imps{
      {{0.9, 0.1}, {1, 0}, false},
      {{0.1, 0.9}, {1, 0}, false},
      {{0.5, 0.4}, {1, 1}, true},
      {{0.5, 0.4}, {0, 0}, false},
  };
  const auto r = summarize(imps);
  EXPECT_EQ(r.impressions, 4u);
  EXPECT_EQ(r.auc_counted, 2u);
  EXPECT_EQ(r.auc_excluded, 2u);
  EXPECT_EQ(r.rank_counted, 3u);
  EXPECT_EQ(r.rank_excluded, 1u);
  EXPECT_EQ(r.cold_users, 1u);
  EXPECT_DOUBLE_EQ(r.auc, 0.5);
  EXPECT_DOUBLE_EQ(r.mrr, (1.0 + 0.5 + 0.75) / 3.0);
  std::reverse(imps.begin(), imps.end());
  const auto back = summarize(imps);
  EXPECT_DOUBLE_EQ(back.auc, r.auc);
  EXPECT_DOUBLE_EQ(back.mrr, r.mrr);
}

TEST(Summarize, OracleScoresArePerfect) {
  Rng rng(53);
  std::vector<ScoredImpression> imps;
  double best_mrr = 0;  // positives fill ranks 1..P
  for (int i = 0; i < 100; ++i) {
    ScoredImpression s;
    int n_pos = 0;
    for (int c = 0; c < 6; ++c) {
      const int lab = c < 5 && (c == 0 || rng.bernoulli(0.2));
      n_pos += lab;
      s.labels.push_back(lab);
      s.scores.push_back(lab);
    }
    double rr = 0;
    for (int k = 1; k <= n_pos; ++k) rr += 1.0 / k;
    best_mrr += rr / n_pos;
    imps.push_back(s);
  }
  const auto r = summarize(imps);
  EXPECT_EQ(r.auc, 1.0);
  EXPECT_NEAR(r.mrr, best_mrr / 100, 1e-12);
  EXPECT_EQ(r.ndcg5, 1.0);
  EXPECT_EQ(r.ndcg10, 1.0);
}

TEST(Evaluate, ThreadCountDoesNotChangeScores) {
  const auto config = testing::tiny_config();
  const auto bundle = testing::tiny_bundle();
  const auto graphs = testing::snapshot_of(bundle, config);
  enc::LicmModel model(enc::ModelConfig::from(config), enc::ModelDims::from(bundle), 2);
  const auto imps = bundle.split(data::Split::kTest);
  const auto a = score_impressions(model, bundle, graphs, config, imps, 1);
  const auto b = score_impressions(model, bundle, graphs, config, imps, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].scores, b[i].scores);
  const auto j = report_json(summarize(a), 0xabc, 0xdef, data::Split::kTest);
  EXPECT_EQ(j["config_hash"], "0000000000000abc");
  EXPECT_EQ(j["split"], "test");
}

TEST(Checkpoint, RoundTripIsByteExactAndRestores) {
  const auto config = testing::tiny_config();
  const auto bundle = testing::tiny_bundle();
  enc::LicmModel model(enc::ModelConfig::from(config), enc::ModelDims::from(bundle), 4);
  const auto ck = ckpt::capture(model, config.hash(), ckpt::model_meta(model, bundle));
  const auto bytes = ckpt::serialize(ck);
  EXPECT_EQ(bytes.substr(0, 8), "LICMCKPT");
  const auto back = ckpt::deserialize(bytes);
  EXPECT_EQ(ckpt::serialize(back), bytes);
  const auto rebuilt = ckpt::instantiate(back, bundle);
  for (const auto& [name, t] : model.params().all()) {
    const auto r = rebuilt.params().get(name).data();
    EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), r.begin())) << name;
  }
  EXPECT_THROW(ckpt::deserialize(bytes.substr(0, bytes.size() - 1)), ckpt::CheckpointError);
}

TEST(Checkpoint, VocabularyMismatchIsHardError) {
  const auto config = testing::tiny_config();
  const auto bundle = testing::tiny_bundle();
  enc::LicmModel model(enc::ModelConfig::from(config), enc::ModelDims::from(bundle), 4);
  const auto ck = ckpt::capture(model, config.hash(), ckpt::model_meta(model, bundle));
  const auto other = testing::tiny_bundle(3, 8, 30);
  EXPECT_THROW(ckpt::instantiate(ck, other), ckpt::CheckpointError);
  auto bad = ck;
  bad.groups.erase("fuse.b");
  EXPECT_THROW(ckpt::restore(bad, model), ckpt::CheckpointError);
}

}  // namespace
}  // namespace licm::eval

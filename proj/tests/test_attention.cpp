#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "licm/attention.hpp"
#include "licm/ops.hpp"
#include "support.hpp"

namespace licm::num {
namespace {

using testing::check_gradients;
using testing::random_tensor;

// Plain loops over raw arrays, no tensor ops.
std::vector<double> pool_oracle(const Tensor& v, const Tensor& w, const Tensor& q,
                                const std::vector<bool>& mask) {
  const std::size_t t = v.rows(), d = v.cols(), a = w.cols();
  std::vector<double> logit(t, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < a; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < d; ++k) s += v.at(i, k) * w.at(k, j);
      logit[i] += q.at(j) * std::tanh(s);
    }
  }
  double mx = -1e300;
  for (std::size_t i = 0; i < t; ++i)
    if (mask[i]) mx = std::max(mx, logit[i]);
  std::vector<double> alpha(t, 0.0);
  double z = 0;
  for (std::size_t i = 0; i < t; ++i)
    if (mask[i]) z += alpha[i] = std::exp(logit[i] - mx);
  for (auto& x : alpha) x /= z;
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t k = 0; k < d; ++k) out[k] += alpha[i] * v.at(i, k);
  return out;
}

TEST(AttentionPool, MatchesOracleOnRandomInstances) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t t = 1 + rng.below(6), d = 1 + rng.below(5), a = 1 + rng.below(4);
    auto v = random_tensor({t, d}, rng), w = random_tensor({d, a}, rng), q = random_tensor({a}, rng);
    std::vector<bool> mask(t);
    for (std::size_t i = 0; i < t; ++i) mask[i] = rng.bernoulli(0.7);
    mask[rng.below(t)] = true;
    auto res = attention_pool(v, {w, q}, mask);
    const auto expect = pool_oracle(v, w, q, mask);
    for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(res.output.at(k), expect[k], 1e-12);
    double total = 0;
    for (std::size_t i = 0; i < t; ++i) {
      EXPECT_GE(res.weights.at(i), 0.0);
      if (!mask[i]) EXPECT_EQ(res.weights.at(i), 0.0);
      total += res.weights.at(i);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(AttentionPool, SingleItemIsIdentity) {
  Rng rng(12);
  auto v = random_tensor({1, 4}, rng), w = random_tensor({4, 3}, rng), q = random_tensor({3}, rng);
  auto res = attention_pool(v, {w, q});
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(res.output.at(k), v.at(0, k));
}

TEST(AttentionPool, ZeroQueryGivesMean) {
  Rng rng(13);
  auto v = random_tensor({3, 2}, rng), w = random_tensor({2, 2}, rng);
  auto res = attention_pool(v, {w, Tensor::zeros({2})});
  EXPECT_NEAR(res.output.at(0), (v.at(0, 0) + v.at(1, 0) + v.at(2, 0)) / 3.0, 1e-15);
}

TEST(AttentionPool, RejectsFullyMaskedAndBadMask) {
  Rng rng(14);
  auto v = random_tensor({2, 2}, rng), w = random_tensor({2, 2}, rng), q = random_tensor({2}, rng);
  EXPECT_THROW(attention_pool(v, {w, q}, {false, false}), std::invalid_argument);
  EXPECT_THROW(attention_pool(v, {w, q}, {true}), DimensionError);
}

TEST(AttentionPool, GradientCheck) {
  Rng rng(15);
  auto v = random_tensor({4, 3}, rng), w = random_tensor({3, 2}, rng), q = random_tensor({2}, rng);
  auto f = [&] { return sum(tanh(attention_pool(v, {w, q}, {true, true, false, true}).output)); };
  EXPECT_LT(check_gradients(f, {v, w, q}).worst(), 1e-7);
}

std::vector<double> msa_oracle(const Tensor& x, const MsaParams& p) {
  const std::size_t t = x.rows(), din = x.cols(), dout = p.wq.cols(), dh = dout / p.heads;
  auto proj = [&](const Tensor& w) {
    std::vector<double> out(t * dout, 0.0);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < dout; ++j)
        for (std::size_t k = 0; k < din; ++k) out[i * dout + j] += x.at(i, k) * w.at(k, j);
    return out;
  };
  const auto q = proj(p.wq), k = proj(p.wk), v = proj(p.wv);
  std::vector<double> out(t * dout, 0.0);
  for (std::size_t h = 0; h < p.heads; ++h) {
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> s(t);
      for (std::size_t j = 0; j < t; ++j) {
        double dotp = 0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dotp += q[i * dout + c] * k[j * dout + c];
        s[j] = dotp / std::sqrt(static_cast<double>(dh));
      }
      const double mx = *std::max_element(s.begin(), s.end());
      double z = 0;
      for (auto& e : s) z += e = std::exp(e - mx);
      for (std::size_t j = 0; j < t; ++j)
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) out[i * dout + c] += s[j] / z * v[j * dout + c];
    }
  }
  return out;
}

TEST(MultiHeadSelfAttention, MatchesOracle) {
  Rng rng(16);
  for (std::size_t heads : {1u, 2u, 3u}) {
    auto x = random_tensor({5, 4}, rng);
    MsaParams p{random_tensor({4, 6}, rng), random_tensor({4, 6}, rng), random_tensor({4, 6}, rng), heads};
    auto res = multi_head_self_attention(x, p);
    const auto expect = msa_oracle(x, p);
    ASSERT_EQ(res.output.shape(), (Shape{5, 6}));
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(res.output.data()[i], expect[i], 1e-12);
    ASSERT_EQ(res.attention.size(), heads);
    for (const auto& a : res.attention)
      for (std::size_t r = 0; r < 5; ++r) {
        double total = 0;
        for (std::size_t c = 0; c < 5; ++c) total += a.at(r, c);
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
  }
}

TEST(MultiHeadSelfAttention, PermutationEquivariant) {
  Rng rng(17);
  auto x = random_tensor({4, 3}, rng);
  MsaParams p{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng), random_tensor({3, 4}, rng), 2};
  const std::vector<std::int32_t> perm{2, 0, 3, 1};
  auto a = multi_head_self_attention(gather_rows(x, perm), p).output;
  auto b = gather_rows(multi_head_self_attention(x, p).output, perm);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-13);
}

TEST(MultiHeadSelfAttention, HeadsMustDivideWidth) {
  Rng rng(18);
  auto x = random_tensor({2, 3}, rng);
  MsaParams p{random_tensor({3, 5}, rng), random_tensor({3, 5}, rng), random_tensor({3, 5}, rng), 2};
  try {
    multi_head_self_attention(x, p);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("configuration error"), std::string::npos);
  }
}

TEST(MultiHeadSelfAttention, GradientCheck) {
  Rng rng(19);
  auto x = random_tensor({3, 4}, rng);
  MsaParams p{random_tensor({4, 4}, rng), random_tensor({4, 4}, rng), random_tensor({4, 4}, rng), 2};
  auto f = [&] { return sum(tanh(multi_head_self_attention(x, p).output)); };
  EXPECT_LT(check_gradients(f, {x, p.wq, p.wk, p.wv}).worst(), 1e-7);
}

}  // namespace
}  // namespace licm::num

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "licm/adam.hpp"
#include "licm/ops.hpp"

namespace licm::num {
namespace {

TEST(AdamSchedule, WarmupThenLinearDecay) {
  Adam adam({.base_lr = 1e-3, .warmup_fraction = 0.1, .total_steps = 100});
  EXPECT_EQ(adam.warmup_steps(), 10);
  EXPECT_DOUBLE_EQ(adam.learning_rate(0), 0.0);
  EXPECT_DOUBLE_EQ(adam.learning_rate(5), 5e-4);
  EXPECT_DOUBLE_EQ(adam.learning_rate(10), 1e-3);
  EXPECT_DOUBLE_EQ(adam.learning_rate(55), 1e-3 * 45.0 / 90.0);
  EXPECT_DOUBLE_EQ(adam.learning_rate(100), 0.0);
  for (std::int64_t t = 1; t < 10; ++t) EXPECT_GT(adam.learning_rate(t), adam.learning_rate(t - 1));
  for (std::int64_t t = 11; t <= 100; ++t) EXPECT_LT(adam.learning_rate(t), adam.learning_rate(t - 1));
}

TEST(AdamSchedule, NoWarmup) {
  Adam adam({.base_lr = 2.0, .warmup_fraction = 0.0, .total_steps = 4});
  EXPECT_DOUBLE_EQ(adam.learning_rate(0), 2.0);
  EXPECT_DOUBLE_EQ(adam.learning_rate(2), 1.0);
}

TEST(Adam, FirstStepMatchesHandComputation) {
  ParamStore ps;
  auto& w = ps.add("w", Tensor::vector({1.0, -2.0}, true));
  auto g = w.mutable_grad();
  g[0] = 0.5;
  g[1] = -3.0;
  Adam adam({.base_lr = 0.1, .warmup_fraction = 0.0, .total_steps = 10});
  adam.apply(ps);
  // Bias-corrected first step moves each weight by lr * g / (|g| + eps').
  for (int i = 0; i < 2; ++i) {
    const double gi = i == 0 ? 0.5 : -3.0;
    const double m = 0.1 * gi / (1 - 0.9), v = 0.001 * gi * gi / (1 - 0.999);
    const double expect = (i == 0 ? 1.0 : -2.0) - 0.1 * m / (std::sqrt(v) + 1e-8);
    EXPECT_NEAR(w.at(i), expect, 1e-15);
  }
  EXPECT_EQ(adam.step(), 1);
}

TEST(Adam, MinimizesQuadratic) {
  ParamStore ps;
  auto& x = ps.add("x", Tensor::vector({5.0, -3.0, 0.5}, true));
  const auto target = Tensor::vector({1.0, 2.0, -1.0});
  Adam adam({.base_lr = 0.1, .warmup_fraction = 0.05, .total_steps = 2000});
  for (int s = 0; s < 2000; ++s) {
    auto diff = sub(x, target);
    sum(mul(diff, diff)).backward();
    adam.apply(ps);
    ps.zero_grad();
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(x.at(i), target.at(i), 1e-3);
}

TEST(Adam, NonFiniteGradientNamesParameterAndLeavesValuesAlone) {
  ParamStore ps;
  auto& a = ps.add("a", Tensor::vector({1.0}, true));
  auto& b = ps.add("b", Tensor::vector({1.0}, true));
  a.mutable_grad()[0] = 1.0;
  b.mutable_grad()[0] = std::numeric_limits<double>::quiet_NaN();
  Adam adam({.base_lr = 0.1, .warmup_fraction = 0.0, .total_steps = 10});
  try {
    adam.apply(ps);
    FAIL();
  } catch (const NonFiniteGradient& e) {
    EXPECT_NE(std::string(e.what()).find("parameter b"), std::string::npos) << e.what();
  }
  EXPECT_EQ(a.at(0), 1.0);
  EXPECT_EQ(adam.step(), 0);
}

TEST(ParamStore, XavierBoundsAndOrder) {
  ParamStore ps;
  Rng rng(1);
  auto& w = ps.add_xavier("m", {20, 30}, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  for (double v : w.data()) EXPECT_LE(std::abs(v), bound);
  ps.add_zeros("a", {3});
  EXPECT_EQ(ps.all().begin()->first, "a");
  EXPECT_EQ(ps.total_size(), 603u);
  EXPECT_THROW(ps.get("missing"), std::out_of_range);
}

}  // namespace
}  // namespace licm::num

#include <gtest/gtest.h>

#include <cmath>

#include "emphasis/objectives.hpp"
#include "oracles.hpp"

using namespace emphasis;

namespace {

using Vec = std::vector<double>;

Vec random_vec(Rng& rng, std::size_t n, double lo, double hi) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST(Mse, PerfectPredictionIsZero) {
  const Vec logits{0.0, 1.5, -2.0};
  Vec targets;
  for (double l : logits) targets.push_back(sigmoid(l));
  const auto out = mse_loss(logits, targets);
  EXPECT_EQ(out.value, 0.0);
  for (double g : out.grad) EXPECT_EQ(g, 0.0);
}

TEST(Mse, HandValue) { EXPECT_DOUBLE_EQ(mse_loss(Vec{0.0}, Vec{0.0}).value, 0.25); }

TEST(Mse, LengthMismatch) {
  EXPECT_THROW(mse_loss(Vec{0.0, 1.0}, Vec{0.0}), ArgumentError);
  EXPECT_THROW(pairwise_loss(Vec{0.0, 1.0}, Vec{0.0}), ArgumentError);
  EXPECT_THROW(combined_loss(Vec{0.0}, Vec{0.0, 1.0}, 1.0), ArgumentError);
}

TEST(Mse, IsComputedOnSigmoidScores) {
  // logit 2 vs target 1: on scores the error is 1 - sigmoid(2), not 1 - 2
  const double expected = std::pow(1.0 - sigmoid(2.0), 2.0);
  EXPECT_NEAR(mse_loss(Vec{2.0}, Vec{1.0}).value, expected, 1e-15);
}

TEST(Pairwise, EqualTargetsAnnihilate) {
  const auto out = pairwise_loss(Vec{0.3, -2.0, 5.0}, Vec{0.4, 0.4, 0.4});
  EXPECT_EQ(out.value, 0.0);
  for (double g : out.grad) EXPECT_EQ(g, 0.0);
}

TEST(Pairwise, ClosedForms) {
  // (1/4) * 1.0 * ln 2
  EXPECT_NEAR(pairwise_loss(Vec{0.0, 0.0}, Vec{1.0, 0.0}).value, 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(pairwise_loss(Vec{0.0, 0.0}, Vec{1.0, 0.0}).value, 0.173287, 1e-6);
  // (1/4) * 0.5 * -log sigmoid(1)
  EXPECT_NEAR(pairwise_loss(Vec{2.0, 1.0}, Vec{0.8, 0.3}).value, 0.125 * std::log1p(std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(pairwise_loss(Vec{2.0, 1.0}, Vec{0.8, 0.3}).value, 0.039157, 1e-6);
}

TEST(Pairwise, UsesRawLogitsNotScores) {
  const double on_scores = 0.125 * neg_log_sigmoid(sigmoid(2.0) - sigmoid(1.0));
  const double value = pairwise_loss(Vec{2.0, 1.0}, Vec{0.8, 0.3}).value;
  EXPECT_GT(std::abs(value - on_scores), 1e-3);
}

TEST(Pairwise, StableAtExtremeLogits) {
  const auto out = pairwise_loss(Vec{-800.0, 800.0}, Vec{1.0, 0.0});
  EXPECT_TRUE(std::isfinite(out.value));
  EXPECT_NEAR(out.value, 0.25 * 1600.0, 1e-9);
  const auto fine = pairwise_loss(Vec{800.0, -800.0}, Vec{1.0, 0.0});
  EXPECT_GE(fine.value, 0.0);
  EXPECT_LT(fine.value, 1e-300);
  EXPECT_NEAR(neg_log_sigmoid(-35.0), 35.0 + std::log1p(std::exp(-35.0)), 1e-12);
}

TEST(Pairwise, NonNegativeAndShiftInvariant) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    const Vec s = random_vec(rng, n, -4, 4);
    const Vec t = random_vec(rng, n, 0, 1);
    const double c = rng.uniform(-10, 10);
    Vec shifted = s;
    for (auto& x : shifted) x += c;
    const double base = pairwise_loss(s, t).value;
    EXPECT_GE(base, 0.0);
    EXPECT_NEAR(pairwise_loss(shifted, t).value, base, 1e-12 * (1.0 + base));
  }
}

TEST(Mse, NotShiftInvariant) {
  const Vec s{0.2, -0.4, 1.0};
  const Vec t{0.9, 0.1, 0.5};
  Vec shifted = s;
  for (auto& x : shifted) x += 1.0;
  EXPECT_GT(std::abs(mse_loss(shifted, t).value - mse_loss(s, t).value), 1e-3);
}

TEST(Pairwise, StrictlyDecreasesAsPositivePairSeparates) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    Vec s = random_vec(rng, n, -2, 2);
    Vec t = random_vec(rng, n, 0, 1);
    // extremes, so every pair touching 0 or 1 improves as they separate
    t[0] = 1.0;
    t[1] = 0.0;
    double prev = pairwise_loss(s, t).value;
    for (int step = 0; step < 20; ++step) {
      s[0] += 0.5;
      s[1] -= 0.5;
      const double now = pairwise_loss(s, t).value;
      EXPECT_LT(now, prev);
      prev = now;
    }
  }
}

TEST(Pairwise, PairContributionsAreAntisymmetric) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    const Vec s = random_vec(rng, n, -3, 3);
    const Vec t = random_vec(rng, n, 0, 1);
    // each pair's gradient sums to zero, so the total does too
    const auto g = pairwise_loss(s, t).grad;
    double sum = 0.0, mag = 0.0;
    for (double x : g) {
      sum += x;
      mag += std::abs(x);
    }
    EXPECT_LE(std::abs(sum), 1e-14 * (1.0 + mag));
    // single pair in isolation: exact negation
    const auto pair = pairwise_loss(Vec{s[0], s[1]}, Vec{t[0], t[1]}).grad;
    EXPECT_EQ(pair[0], -pair[1]);
  }
}

TEST(Pairwise, RestrictedEnumerationIsBitwiseEqualToFullSum) {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    const Vec s = random_vec(rng, n, -5, 5);
    Vec t = random_vec(rng, n, 0, 1);
    if (trial % 3 == 0) {
      for (auto& x : t) x = std::round(x * 2.0) / 2.0;  // ties
    }
    const auto fast = pairwise_loss(s, t);
    const auto full = pairwise_loss_full(s, t);
    EXPECT_EQ(fast.value, full.value);
    EXPECT_EQ(fast.grad, full.grad);
  }
}

TEST(Losses, GradientsMatchCentralDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    const Vec s = random_vec(rng, n, -3, 3);
    const Vec t = random_vec(rng, n, 0, 1);
    const double lambda = rng.uniform(0, 2);
    using Fn = LossOutput (*)(std::span<const double>, std::span<const double>);
    for (Fn fn : {static_cast<Fn>(&mse_loss), static_cast<Fn>(&pairwise_loss)}) {
      const auto numeric =
          oracle::central_difference([&](std::span<const double> x) { return fn(x, t).value; }, s);
      EXPECT_LT(oracle::compare_gradients(fn(s, t).grad, numeric).worst_rel, 1e-4);
    }
    const auto numeric = oracle::central_difference(
        [&](std::span<const double> x) { return combined_loss(x, t, lambda).value; }, s);
    EXPECT_LT(oracle::compare_gradients(combined_loss(s, t, lambda).grad, numeric).worst_rel, 1e-4);
  }
}

TEST(Combined, DegenerateCases) {
  const Vec s{0.4, -1.2, 2.0};
  const Vec t{0.9, 0.2, 0.5};
  const auto mse = mse_loss(s, t);
  const auto zero = combined_loss(s, t, 0.0);
  EXPECT_EQ(zero.value, mse.value);
  EXPECT_EQ(zero.grad, mse.grad);

  const Vec flat{0.3, 0.3, 0.3};
  const auto c = combined_loss(s, flat, 1.0);
  EXPECT_EQ(c.value, mse_loss(s, flat).value);
  EXPECT_EQ(c.grad, mse_loss(s, flat).grad);
}

TEST(Combined, SumOfClosedForms) {
  const auto out = combined_loss(Vec{0.0, 0.0}, Vec{1.0, 0.0}, 1.0);
  // mse: ((0.5 - 1)^2 + 0.5^2) / 2 = 0.25
  EXPECT_NEAR(out.value, 0.25 + 0.173287, 1e-6);
}

TEST(Combined, NegativeLambdaRejected) {
  EXPECT_THROW(combined_loss(Vec{0.0}, Vec{0.0}, -0.1), ArgumentError);
  EXPECT_THROW(combined_loss(Vec{0.0}, Vec{0.0}, NAN), ArgumentError);
}

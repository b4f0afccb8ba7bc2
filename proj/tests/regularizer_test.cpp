#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "spalp/random.hpp"
#include "spalp/regularizer.hpp"

namespace {

using spalp::mean_squashed;
using spalp::NormalizedReward;
using spalp::RegularizationState;
using spalp::RewardBound;
using spalp::Rng;
using spalp::solve_alpha;
using spalp::squash;

// Independent oracle: the closed form evaluated in extended precision,
// without the expm1 path the library uses.
long double squash_oracle(long double x, long double alpha) {
  return -alpha * (1.0L - std::exp(x / alpha));
}

TEST(Squash, IdentityAtOrigin) {
  for (double alpha : {1e-6, 0.01, 0.5, 1.0, 37.0, 1e9}) {
    EXPECT_EQ(squash(0.0, alpha), 0.0) << "alpha=" << alpha;
  }
}

TEST(Squash, FrozenOracleValues) {
  // Values computed with squash_oracle and frozen.
  EXPECT_NEAR(squash(-1.0, 0.5), -0.43233235838169365, 1e-12);
  EXPECT_NEAR(squash(-0.5, 1000.0), -0.499875020830709, 1e-12);
  EXPECT_NEAR(squash(-0.2, 0.5), -0.16483997698218034, 1e-12);
  EXPECT_NEAR(squash(-0.8, 0.5), -0.3990517410026723, 1e-12);
}

TEST(Squash, MatchesOracleOnRandomInputs) {
  Rng rng(20240117);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-1.0, 0.0);
    const double alpha = std::exp(rng.uniform(std::log(1e-2), std::log(1e6)));
    const double got = squash(x, alpha);
    const double want = static_cast<double>(squash_oracle(x, alpha));
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::abs(want)))
        << "x=" << x << " alpha=" << alpha;
  }
}

TEST(Squash, RejectsNonPositiveAlpha) {
  EXPECT_THROW(squash(-0.5, 0.0), std::invalid_argument);
  EXPECT_THROW(squash(-0.5, -1.0), std::invalid_argument);
}

TEST(Squash, UnderflowGuardPinsToMinusAlpha) {
  // x/alpha below -700: the exponential underflows, result is exactly -alpha.
  EXPECT_EQ(squash(-1.0, 1e-3), -1e-3);
  EXPECT_EQ(squash(-0.9, 1e-4), -1e-4);
}

TEST(Squash, DominanceAndBounds) {
  Rng rng(7);
  for (int i = 0; i < 5000; ++i) {
    const double x = rng.uniform(-1.0, 0.0);
    const double alpha = std::exp(rng.uniform(std::log(1e-3), std::log(1e9)));
    const double y = squash(x, alpha);
    EXPECT_GE(y, x) << "x=" << x << " alpha=" << alpha;
    EXPECT_LE(y, 0.0);
    EXPECT_GE(y, -alpha);
  }
}

TEST(Squash, StrictlyAboveMinusAlphaInModerateRange) {
  // Strict lower bound holds wherever the exponential stays representable.
  Rng rng(8);
  for (int i = 0; i < 5000; ++i) {
    const double x = rng.uniform(-1.0, -1e-6);
    const double alpha = rng.uniform(0.05, 20.0);
    EXPECT_GT(squash(x, alpha), -alpha);
  }
}

TEST(Squash, MonotoneInX) {
  Rng rng(9);
  for (int i = 0; i < 5000; ++i) {
    const double x1 = rng.uniform(-1.0, -1e-5);
    const double x2 = rng.uniform(x1 + 1e-6, 0.0);
    const double alpha = rng.uniform(0.05, 20.0);
    EXPECT_LT(squash(x1, alpha), squash(x2, alpha));
  }
}

TEST(Squash, Contraction) {
  Rng rng(10);
  for (int i = 0; i < 5000; ++i) {
    const double a = rng.uniform(-1.0, 0.0);
    const double b = rng.uniform(-1.0, 0.0);
    const double alpha = std::exp(rng.uniform(std::log(1e-2), std::log(1e6)));
    const double gap = std::abs(squash(a, alpha) - squash(b, alpha));
    EXPECT_LE(gap, std::abs(a - b) + 1e-12);
  }
}

TEST(Squash, HighRewardGapsDominateLowRewardGaps) {
  // Equal raw gaps produce strictly larger squashed gaps at higher rewards.
  Rng rng(11);
  for (int i = 0; i < 5000; ++i) {
    const double delta = rng.uniform(1e-3, 0.4);
    const double b = rng.uniform(-1.0 + delta, -1e-3 - 1e-3);
    const double a = rng.uniform(b + 1e-3, 0.0);
    const double alpha = rng.uniform(0.05, 20.0);
    const double high_gap = std::abs(squash(a, alpha) - squash(a - delta, alpha));
    const double low_gap = std::abs(squash(b, alpha) - squash(b - delta, alpha));
    EXPECT_GT(high_gap, low_gap) << "a=" << a << " b=" << b << " delta=" << delta
                                 << " alpha=" << alpha;
  }
}

TEST(MeanSquashed, FrozenValues) {
  const std::vector<double> zeros{0.0, 0.0};
  EXPECT_EQ(mean_squashed(std::span<const double>(zeros), 3.7), 0.0);

  const std::vector<double> one{-1.0};
  EXPECT_NEAR(mean_squashed(std::span<const double>(one), 0.5), -0.43233235838169365, 1e-12);

  // mean(f(-0.2), f(-0.8)) at alpha = 0.5, from the oracle.
  const std::vector<double> two{-0.2, -0.8};
  EXPECT_NEAR(mean_squashed(std::span<const double>(two), 0.5), -0.2819458589924263, 1e-12);
}

TEST(MeanSquashed, EmptyListThrows) {
  const std::vector<double> empty;
  EXPECT_THROW(mean_squashed(std::span<const double>(empty), 1.0), std::invalid_argument);
}

TEST(MeanSquashed, StrictlyDecreasingInAlpha) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_index(20));
    std::vector<double> rewards(n);
    for (auto& r : rewards) r = rng.uniform(-1.0, 0.0);
    rewards[rng.uniform_index(rewards.size())] = rng.uniform(-1.0, -0.1);  // at least one negative
    const double a1 = rng.uniform(0.05, 10.0);
    const double a2 = a1 + rng.uniform(0.1, 10.0);
    EXPECT_GT(mean_squashed(std::span<const double>(rewards), a1),
              mean_squashed(std::span<const double>(rewards), a2));
  }
}

TEST(MeanSquashed, ConvergesToRawMeanForLargeAlpha) {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> rewards(10);
    for (auto& r : rewards) r = rng.uniform(-1.0, 0.0);
    const double raw_mean = spalp::mean_of(rewards);
    EXPECT_NEAR(mean_squashed(std::span<const double>(rewards), 1e9), raw_mean, 1e-8);
  }
}

TEST(SolveAlpha, BoundAlreadyMetReturnsOff) {
  const std::vector<double> zeros{0.0, 0.0, 0.0};
  EXPECT_FALSE(solve_alpha(std::span<const double>(zeros), RewardBound(-0.5)).is_active());

  // Tie at the bound resolves to Off (the alpha -> infinity semantics).
  const std::vector<double> tie{-0.5};
  EXPECT_FALSE(solve_alpha(std::span<const double>(tie), RewardBound(-0.5)).is_active());
}

TEST(SolveAlpha, KnownRoot) {
  // Bisection oracle cross-checked by dense grid scan: alpha ~ 0.6275005.
  const std::vector<double> rewards{-1.0, -1.0};
  const auto state = solve_alpha(std::span<const double>(rewards), RewardBound(-0.5));
  ASSERT_TRUE(state.is_active());
  EXPECT_NEAR(state.alpha(), 0.6275004874579877, 1e-6);
  EXPECT_NEAR(mean_squashed(std::span<const double>(rewards), state.alpha()), -0.5, 1e-8);
}

TEST(SolveAlpha, RootReproducesBoundOnRandomLists) {
  Rng rng(14);
  for (int i = 0; i < 500; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_index(50));
    std::vector<double> rewards(n);
    for (auto& r : rewards) r = rng.uniform(-1.0, 0.0);
    const double mean = spalp::mean_of(rewards);
    if (mean >= -1e-6) continue;
    const double rb = rng.uniform(mean + 1e-9, -1e-9);
    if (!(rb > mean && rb < 0.0 && rb > -1.0)) continue;
    const auto state = solve_alpha(std::span<const double>(rewards), RewardBound(rb));
    ASSERT_TRUE(state.is_active());
    EXPECT_NEAR(mean_squashed(std::span<const double>(rewards), state.alpha()), rb, 1e-8);
  }
}

TEST(SolveAlpha, RootBelowDefaultBracket) {
  // r_b within 1e-6 of zero pushes the root below 1e-6.
  const std::vector<double> rewards{-1.0, -0.5};
  const RewardBound rb(-1e-7);
  const auto state = solve_alpha(std::span<const double>(rewards), rb);
  ASSERT_TRUE(state.is_active());
  EXPECT_LT(state.alpha(), 1e-6);
  EXPECT_NEAR(mean_squashed(std::span<const double>(rewards), state.alpha()), rb.value(), 1e-8);
}

TEST(SolveAlpha, EmptyListThrows) {
  const std::vector<double> empty;
  EXPECT_THROW(solve_alpha(std::span<const double>(empty), RewardBound(-0.5)),
               std::invalid_argument);
}

TEST(NormalizedRewardType, ClampsAtConstruction) {
  EXPECT_EQ(NormalizedReward(-2.0).value(), -1.0);
  EXPECT_EQ(NormalizedReward(0.25).value(), 0.0);
  EXPECT_EQ(NormalizedReward(-0.4).value(), -0.4);
}

TEST(RewardBoundType, RejectsClosedEndpoints) {
  EXPECT_THROW(RewardBound(-1.0), std::invalid_argument);
  EXPECT_THROW(RewardBound(0.0), std::invalid_argument);
  EXPECT_THROW(RewardBound(0.5), std::invalid_argument);
  EXPECT_NO_THROW(RewardBound(-0.999));
}

TEST(RegularizationStateType, ActiveRequiresPositiveAlpha) {
  EXPECT_THROW(RegularizationState::active(0.0), std::invalid_argument);
  EXPECT_THROW(RegularizationState::active(-0.1), std::invalid_argument);
  EXPECT_TRUE(RegularizationState::active(0.3).is_active());
  EXPECT_FALSE(RegularizationState::off().is_active());
  EXPECT_THROW(RegularizationState::off().alpha(), std::logic_error);
}

}  // namespace

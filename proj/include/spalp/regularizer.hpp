#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spalp {

// Reward shifted into [-1, 0]. Out-of-range inputs are clamped at construction.
class NormalizedReward {
 public:
  NormalizedReward() = default;
  explicit NormalizedReward(double v) : value_(std::clamp(v, -1.0, 0.0)) {}
  double value() const { return value_; }

 private:
  double value_ = 0.0;
};

// Target mean squashed reward. Must lie strictly inside (-1, 0): -1 is always
// already exceeded and 0 is unreachable by squashing strictly negative means.
class RewardBound {
 public:
  explicit RewardBound(double rb) : value_(rb) {
    if (!(rb > -1.0 && rb < 0.0)) {
      throw std::invalid_argument("RewardBound: r_b must lie in (-1, 0), got " +
                                  std::to_string(rb));
    }
  }
  double value() const { return value_; }

 private:
  double value_;
};

// Either Off or Active(alpha). While Off, learning progress is computed on
// raw rewards; while Active, rewards pass through the squashing function.
class RegularizationState {
 public:
  static RegularizationState off() { return RegularizationState{}; }

  static RegularizationState active(double alpha) {
    if (!(alpha > 0.0)) {
      throw std::invalid_argument("RegularizationState: alpha must be positive");
    }
    RegularizationState s;
    s.alpha_ = alpha;
    return s;
  }

  bool is_active() const { return alpha_.has_value(); }

  double alpha() const {
    if (!alpha_) throw std::logic_error("RegularizationState: alpha queried while Off");
    return *alpha_;
  }

 private:
  std::optional<double> alpha_;
};

// f_alpha(x) = -alpha * (1 - exp(x / alpha)).
//
// Evaluated as alpha * expm1(x / alpha): the naive form cancels
// catastrophically for large alpha, where f_alpha approaches the identity.
// Exponents below -700 underflow; the result is pinned to -alpha there.
inline double squash(double x, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("squash: alpha must be positive");
  const double e = x / alpha;
  if (e < -700.0) return -alpha;
  return alpha * std::expm1(e);
}

inline double squash(NormalizedReward x, double alpha) { return squash(x.value(), alpha); }

inline double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Arithmetic mean of squash(r_i, alpha).
inline double mean_squashed(std::span<const double> rewards, double alpha) {
  if (rewards.empty()) throw std::invalid_argument("mean_squashed: empty reward list");
  double sum = 0.0;
  for (double r : rewards) sum += squash(r, alpha);
  return sum / static_cast<double>(rewards.size());
}

inline std::vector<double> reward_values(std::span<const NormalizedReward> rewards) {
  std::vector<double> out;
  out.reserve(rewards.size());
  for (const auto& r : rewards) out.push_back(r.value());
  return out;
}

inline double mean_squashed(std::span<const NormalizedReward> rewards, double alpha) {
  const auto vals = reward_values(rewards);
  return mean_squashed(std::span<const double>(vals), alpha);
}

// Solves (1/N) sum_i f_alpha(r_i) = r_b for alpha.
//
// If mean(rewards) >= r_b the bound is already met without squashing and the
// result is Off (the alpha -> infinity limit). Otherwise the root is unique:
// for each fixed x < 0, f_alpha(x) is strictly decreasing in alpha, so the
// mean is strictly monotone, falling from 0 (alpha -> 0+) to mean(rewards)
// (alpha -> infinity). Bisection on that monotone residual is unconditionally
// robust. The bracket starts at [1e-6, 1.0]; the high end doubles until the
// residual turns negative, and the low end halves for bounds within 1e-6 of
// zero, where the root sits below the default bracket.
inline RegularizationState solve_alpha(std::span<const double> rewards, RewardBound r_b,
                                       double residual_tol = 1e-8, int max_iter = 200) {
  if (rewards.empty()) throw std::invalid_argument("solve_alpha: empty reward list");
  const double target = r_b.value();
  if (mean_of(rewards) >= target) return RegularizationState::off();

  const auto residual = [&](double a) { return mean_squashed(rewards, a) - target; };

  double lo = 1e-6;
  double hi = 1.0;
  while (residual(hi) >= 0.0 && hi < 1e300) {
    lo = hi;
    hi *= 2.0;
  }
  while (residual(lo) <= 0.0) {
    hi = lo;
    lo *= 0.5;
  }

  double mid = 0.5 * (lo + hi);
  for (int i = 0; i < max_iter; ++i) {
    mid = 0.5 * (lo + hi);
    const double g = residual(mid);
    if (std::abs(g) <= residual_tol) break;
    if (g > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return RegularizationState::active(mid);
}

inline RegularizationState solve_alpha(std::span<const NormalizedReward> rewards,
                                       RewardBound r_b, double residual_tol = 1e-8,
                                       int max_iter = 200) {
  const auto vals = reward_values(rewards);
  return solve_alpha(std::span<const double>(vals), r_b, residual_tol, max_iter);
}

}  // namespace spalp

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "spalp/errors.hpp"
#include "spalp/teacher.hpp"

namespace spalp {

enum class RewardShape { Linear, Sigmoid };

inline std::string to_string(RewardShape shape) {
  return shape == RewardShape::Linear ? "linear" : "sigmoid";
}

struct ToyEnvConfig {
  int dims = 2;
  int cubes_per_dim = 10;
  RewardShape reward_shape = RewardShape::Linear;
  bool transfer_learning = false;
  double linear_step = 1.0;         // reward gained per sample under Linear
  double sigmoid_steepness = 0.15;  // s
  double sigmoid_midpoint = 50.0;   // k0, in sample counts
  double mastery_threshold = 75.0;

  void validate() const {
    if (dims < 1) throw std::invalid_argument("ToyEnvConfig: dims must be positive");
    if (cubes_per_dim < 1) {
      throw std::invalid_argument("ToyEnvConfig: cubes_per_dim must be positive");
    }
    if (!(linear_step > 0.0)) {
      throw std::invalid_argument("ToyEnvConfig: linear_step must be positive");
    }
    if (!(sigmoid_steepness > 0.0)) {
      throw std::invalid_argument("ToyEnvConfig: sigmoid_steepness must be positive");
    }
    if (!(mastery_threshold > 0.0 && mastery_threshold < 100.0)) {
      throw std::invalid_argument("ToyEnvConfig: mastery_threshold must lie in (0, 100)");
    }
  }
};

// Lattice of hypercubes over the unit box [0,1]^d. Sampling an unlocked cube
// advances its reward curve; rewards are capped at 100. Only the origin cube
// starts unlocked; a cube unlocks once an orthogonal neighbor's reward
// exceeds the mastery threshold, and stays unlocked. The environment is a
// pure bandit over cubes: fully deterministic given the sample sequence.
class CubeGrid {
 public:
  explicit CubeGrid(ToyEnvConfig config) : cfg_(config) {
    cfg_.validate();
    total_ = 1;
    for (int i = 0; i < cfg_.dims; ++i) total_ *= static_cast<std::size_t>(cfg_.cubes_per_dim);
    cubes_.resize(total_);
    cubes_[0].unlocked = true;  // origin: all-lowest indices
  }

  int dims() const { return cfg_.dims; }
  int cubes_per_dim() const { return cfg_.cubes_per_dim; }
  std::size_t cube_count() const { return total_; }
  const ToyEnvConfig& config() const { return cfg_; }

  // Cube index per dimension: floor(coordinate * c), with coordinate 1.0
  // mapping onto the last cube.
  std::vector<int> locate_cube(const TaskParams& params) const {
    if (static_cast<int>(params.values.size()) != cfg_.dims) {
      throw std::invalid_argument("CubeGrid: parameter dimension mismatch");
    }
    std::vector<int> idx(cfg_.dims);
    for (int i = 0; i < cfg_.dims; ++i) {
      const double x = params.values[i];
      if (!(x >= 0.0 && x <= 1.0)) {
        throw std::invalid_argument("CubeGrid: parameters outside the unit box");
      }
      idx[i] = std::min(static_cast<int>(x * cfg_.cubes_per_dim), cfg_.cubes_per_dim - 1);
    }
    return idx;
  }

  // Raw reward in [0, 100]. Locked cubes yield 0 and are left untouched.
  double sample(const TaskParams& params) {
    const std::size_t flat = flat_index(locate_cube(params));
    Cube& cube = cubes_[flat];
    if (!cube.unlocked) return 0.0;

    if (cube.sample_count == 0 && cfg_.transfer_learning) {
      // First contact inherits the average current reward of the unlocked,
      // previously sampled orthogonal neighbors.
      double sum = 0.0;
      int n = 0;
      for (const std::size_t nb : orthogonal_neighbors(flat)) {
        if (cubes_[nb].unlocked && cubes_[nb].sample_count > 0) {
          sum += current_reward(nb);
          ++n;
        }
      }
      if (n > 0) cube.progress_offset = offset_for_first_reward(sum / n);
    }

    cube.sample_count += 1;
    const double reward = reward_at(cube);
    if (reward > cfg_.mastery_threshold) {
      for (const std::size_t nb : orthogonal_neighbors(flat)) cubes_[nb].unlocked = true;
    }
    return reward;
  }

  // Reward the cube yielded on its most recent sample; 0 if never sampled.
  double current_reward(std::size_t flat) const {
    const Cube& cube = cubes_.at(flat);
    return cube.sample_count == 0 ? 0.0 : reward_at(cube);
  }

  double mastered_fraction() const {
    std::size_t mastered = 0;
    for (std::size_t i = 0; i < total_; ++i) {
      if (current_reward(i) > cfg_.mastery_threshold) ++mastered;
    }
    return static_cast<double>(mastered) / static_cast<double>(total_);
  }

  bool unlocked(std::size_t flat) const { return cubes_.at(flat).unlocked; }
  long sample_count(std::size_t flat) const { return cubes_.at(flat).sample_count; }

  std::size_t flat_index(const std::vector<int>& idx) const {
    if (static_cast<int>(idx.size()) != cfg_.dims) {
      throw std::invalid_argument("CubeGrid: index dimension mismatch");
    }
    std::size_t flat = 0;
    for (int i = 0; i < cfg_.dims; ++i) {
      if (idx[i] < 0 || idx[i] >= cfg_.cubes_per_dim) {
        throw std::invalid_argument("CubeGrid: cube index out of range");
      }
      flat = flat * static_cast<std::size_t>(cfg_.cubes_per_dim) + static_cast<std::size_t>(idx[i]);
    }
    return flat;
  }

  std::vector<int> unflatten(std::size_t flat) const {
    std::vector<int> idx(cfg_.dims);
    for (int i = cfg_.dims - 1; i >= 0; --i) {
      idx[i] = static_cast<int>(flat % static_cast<std::size_t>(cfg_.cubes_per_dim));
      flat /= static_cast<std::size_t>(cfg_.cubes_per_dim);
    }
    return idx;
  }

  std::vector<std::size_t> orthogonal_neighbors(std::size_t flat) const {
    const auto idx = unflatten(flat);
    std::vector<std::size_t> out;
    out.reserve(2 * cfg_.dims);
    for (int i = 0; i < cfg_.dims; ++i) {
      for (const int step : {-1, +1}) {
        auto nb = idx;
        nb[i] += step;
        if (nb[i] >= 0 && nb[i] < cfg_.cubes_per_dim) out.push_back(flat_index(nb));
      }
    }
    return out;
  }

  struct CubeState {
    std::vector<int> index;
    long sample_count;
    double reward;
    bool unlocked;
  };

  // Per-cube state rows for post-hoc heatmaps.
  std::vector<CubeState> snapshot() const {
    std::vector<CubeState> out;
    out.reserve(total_);
    for (std::size_t i = 0; i < total_; ++i) {
      out.push_back(CubeState{unflatten(i), cubes_[i].sample_count, current_reward(i),
                              cubes_[i].unlocked});
    }
    return out;
  }

 private:
  struct Cube {
    long sample_count = 0;
    bool unlocked = false;
    double progress_offset = 0.0;  // reward units (Linear) or sample counts (Sigmoid)
  };

  double reward_at(const Cube& cube) const {
    if (cfg_.reward_shape == RewardShape::Linear) {
      return std::min(100.0, cube.progress_offset +
                                 cfg_.linear_step * static_cast<double>(cube.sample_count));
    }
    const double t = static_cast<double>(cube.sample_count) + cube.progress_offset -
                     cfg_.sigmoid_midpoint;
    return std::min(100.0, 100.0 / (1.0 + std::exp(-cfg_.sigmoid_steepness * t)));
  }

  // Offset making the next (first) sample return exactly `target`. Under
  // Sigmoid the target reward is converted to the sample count at which the
  // logistic attains it, and progress continues from there.
  double offset_for_first_reward(double target) const {
    if (cfg_.reward_shape == RewardShape::Linear) {
      return std::max(0.0, target - cfg_.linear_step);
    }
    const double capped = std::clamp(target, 0.0, 100.0 - 1e-9);
    if (capped <= 0.0) return 0.0;
    const double count_at_target =
        cfg_.sigmoid_midpoint - std::log(100.0 / capped - 1.0) / cfg_.sigmoid_steepness;
    return std::max(0.0, count_at_target - 1.0);
  }

  ToyEnvConfig cfg_;
  std::size_t total_ = 0;
  std::vector<Cube> cubes_;
};

}  // namespace spalp

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spalp/errors.hpp"
#include "spalp/gmm.hpp"
#include "spalp/random.hpp"
#include "spalp/regularizer.hpp"

namespace spalp {

// Point in a bounded d-dimensional continuous parameter space; the unit of
// curriculum sampling.
struct TaskParams {
  std::vector<double> values;

  bool operator==(const TaskParams&) const = default;
};

// Axis-aligned box of valid task parameters. All nearest-neighbor distances
// and mixture fits run in coordinates normalized to [0,1] per dimension, so
// the metric is independent of each dimension's units.
class ParamSpace {
 public:
  ParamSpace(std::vector<double> lower, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.empty() || lower_.size() != upper_.size()) {
      throw std::invalid_argument("ParamSpace: bounds must be non-empty and equal length");
    }
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      if (!(lower_[i] < upper_[i])) {
        throw std::invalid_argument("ParamSpace: lower bound must be below upper bound");
      }
    }
  }

  static ParamSpace unit_box(int dims) {
    if (dims < 1) throw std::invalid_argument("ParamSpace: dims must be positive");
    return ParamSpace(std::vector<double>(dims, 0.0), std::vector<double>(dims, 1.0));
  }

  int dims() const { return static_cast<int>(lower_.size()); }

  bool contains(const TaskParams& p) const {
    if (p.values.size() != lower_.size()) return false;
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      if (p.values[i] < lower_[i] || p.values[i] > upper_[i]) return false;
    }
    return true;
  }

  TaskParams clamp(TaskParams p) const {
    if (p.values.size() != lower_.size()) {
      throw std::invalid_argument("ParamSpace: dimension mismatch");
    }
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      p.values[i] = std::clamp(p.values[i], lower_[i], upper_[i]);
    }
    return p;
  }

  std::vector<double> normalize(const TaskParams& p) const {
    if (p.values.size() != lower_.size()) {
      throw std::invalid_argument("ParamSpace: dimension mismatch");
    }
    std::vector<double> out(p.values.size());
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      out[i] = (p.values[i] - lower_[i]) / (upper_[i] - lower_[i]);
    }
    return out;
  }

  TaskParams denormalize(const std::vector<double>& unit) const {
    if (unit.size() != lower_.size()) {
      throw std::invalid_argument("ParamSpace: dimension mismatch");
    }
    TaskParams p;
    p.values.resize(unit.size());
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      p.values[i] = lower_[i] + unit[i] * (upper_[i] - lower_[i]);
    }
    return p;
  }

  TaskParams uniform_sample(Rng& rng) const {
    TaskParams p;
    p.values.resize(lower_.size());
    for (std::size_t i = 0; i < lower_.size(); ++i) {
      p.values[i] = rng.uniform(lower_[i], upper_[i]);
    }
    return p;
  }

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

struct RewardRecord {
  TaskParams params;
  NormalizedReward reward;
};

// Stored form of a record: the record plus its normalized coordinates and a
// monotone sequence id used for self-exclusion and tie-breaking.
struct HistoryEntry {
  RewardRecord record;
  std::vector<double> normalized;
  std::uint64_t seq = std::numeric_limits<std::uint64_t>::max();
};

// FIFO window of the last N records; the GMM fitting batch.
class RecentBuffer {
 public:
  explicit RecentBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("RecentBuffer: capacity must be positive");
  }

  void push(HistoryEntry entry) {
    entries_.push_back(std::move(entry));
    if (entries_.size() > capacity_) entries_.pop_front();
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<HistoryEntry>& entries() const { return entries_; }

 private:
  std::deque<HistoryEntry> entries_;
  std::size_t capacity_;
};

// Long-term FIFO of records supporting nearest-neighbor queries over the
// normalized parameter coordinates.
class RewardHistory {
 public:
  explicit RewardHistory(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("RewardHistory: capacity must be positive");
  }

  void push(HistoryEntry entry) {
    entries_.push_back(std::move(entry));
    if (entries_.size() > capacity_) entries_.pop_front();
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<HistoryEntry>& entries() const { return entries_; }

  struct Neighbor {
    std::uint64_t seq;
    double reward;
    double distance_sq;
  };

  // Nearest entry by Euclidean distance in normalized coordinates, skipping
  // the entry with sequence id `exclude_seq`. Exact ties resolve to the most
  // recent record.
  std::optional<Neighbor> nearest(std::span<const double> normalized_query,
                                  std::uint64_t exclude_seq) const {
    std::optional<Neighbor> best;
    for (const auto& e : entries_) {
      if (e.seq == exclude_seq) continue;
      if (e.normalized.size() != normalized_query.size()) {
        throw std::invalid_argument("RewardHistory: query dimension mismatch");
      }
      double d = 0.0;
      for (std::size_t i = 0; i < normalized_query.size(); ++i) {
        const double diff = e.normalized[i] - normalized_query[i];
        d += diff * diff;
      }
      if (!best || d <= best->distance_sq) {
        best = Neighbor{e.seq, e.record.reward.value(), d};
      }
    }
    return best;
  }

 private:
  std::deque<HistoryEntry> entries_;
  std::size_t capacity_;
};

// clamp((raw - raw_min) / (raw_max - raw_min), 0, 1) - 1. Raw rewards outside
// the declared range clamp rather than error; control costs can push rewards
// marginally past nominal bounds.
inline NormalizedReward normalize_reward(double raw, double raw_min, double raw_max) {
  if (!(raw_min < raw_max)) {
    throw std::invalid_argument("normalize_reward: raw_min must be below raw_max");
  }
  const double unit = std::clamp((raw - raw_min) / (raw_max - raw_min), 0.0, 1.0);
  return NormalizedReward(unit - 1.0);
}

// |r_new - r_nn| on raw rewards while Off, on squashed rewards while Active.
inline double alp_between(double r_new, double r_nn, const RegularizationState& state) {
  if (!state.is_active()) return std::abs(r_new - r_nn);
  const double a = state.alpha();
  return std::abs(squash(r_new, a) - squash(r_nn, a));
}

// Absolute learning progress of one record against its nearest neighbor in
// the history, the record itself excluded.
inline double compute_alp(const HistoryEntry& record, const RewardHistory& history,
                          const RegularizationState& state) {
  const auto nn = history.nearest(record.normalized, record.seq);
  if (!nn) {
    throw InvalidStateError("compute_alp: reward history holds no eligible neighbor");
  }
  return alp_between(record.record.reward.value(), nn->reward, state);
}

enum class TeacherKind { Random, AlpGmm, Spalp };

inline std::string to_string(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::Random: return "random";
    case TeacherKind::AlpGmm: return "alpgmm";
    case TeacherKind::Spalp: return "spalp";
  }
  return "unknown";
}

struct TeacherConfig {
  int fitting_rate = 250;       // N: episodes between mixture refits
  double p_random = 0.2;        // uniform-sampling probability after bootstrap
  int bootstrap_episodes = -1;  // negative means "use fitting_rate"
  double r_b = -0.1;            // reward bound (SPALP only)
  std::size_t history_capacity = 5000;
  int k_min = 2;
  int k_max = 10;
  int em_max_iter = 100;
  int em_restarts = 1;
  double raw_reward_min = 0.0;
  double raw_reward_max = 100.0;
  std::uint64_t seed = 0;

  int resolved_bootstrap() const {
    return bootstrap_episodes < 0 ? fitting_rate : bootstrap_episodes;
  }
};

// One line of the teacher's per-cycle trace.
struct TraceEntry {
  std::int64_t episode = 0;
  RegularizationState state;
  double mean_reward = 0.0;
  int k_selected = 0;  // 0 when no mixture was fitted this cycle
};

// Curriculum teacher. One class covers all three variants: Random never
// leaves uniform sampling, ALP-GMM computes progress on raw rewards, and
// SPALP squashes rewards through f_alpha whenever regularization is Active.
//
// A teacher instance is a single-threaded state machine; call propose_task
// and observe in alternation from one logical thread. Distinct instances are
// independent and may run in parallel.
class Teacher {
 public:
  struct Stats {
    std::int64_t episodes = 0;
    std::int64_t post_bootstrap_proposals = 0;
    std::int64_t uniform_branch_proposals = 0;
  };

  Teacher(TeacherKind kind, ParamSpace space, TeacherConfig config)
      : kind_(kind),
        space_(std::move(space)),
        config_(config),
        buffer_(static_cast<std::size_t>(std::max(config.fitting_rate, 1))),
        history_(config.history_capacity),
        rng_(derive_seed(config.seed, kProposalStream)) {
    validate_config();
  }

  TeacherKind kind() const { return kind_; }
  const ParamSpace& space() const { return space_; }
  const TeacherConfig& config() const { return config_; }

  // Next task to train on. Uniform over the box during bootstrap and with
  // probability p_random afterwards; otherwise drawn from the parameter
  // marginal of a mixture component chosen proportionally to the positive
  // part of its mean progress, clamped into bounds.
  TaskParams propose_task() {
    if (kind_ == TeacherKind::Random || episodes_ < config_.resolved_bootstrap() || !mixture_) {
      return space_.uniform_sample(rng_);
    }
    ++stats_.post_bootstrap_proposals;
    if (rng_.uniform() < config_.p_random) {
      ++stats_.uniform_branch_proposals;
      return space_.uniform_sample(rng_);
    }

    const int d = space_.dims();
    const auto& comps = mixture_->components();
    double total = 0.0;
    for (const auto& c : comps) total += std::max(0.0, c.mean(d));
    const double u = rng_.uniform();
    std::size_t idx = comps.size() - 1;
    if (total > 0.0) {
      double acc = 0.0;
      for (std::size_t j = 0; j < comps.size(); ++j) {
        acc += std::max(0.0, comps[j].mean(d));
        if (acc >= u * total) {
          idx = j;
          break;
        }
      }
    } else {
      idx = std::min(static_cast<std::size_t>(u * comps.size()), comps.size() - 1);
    }

    // Parameter marginal of the chosen component, in normalized coordinates.
    const auto& c = comps[idx];
    Eigen::LLT<Matrix> llt(c.covariance.topLeftCorner(d, d));
    if (llt.info() != Eigen::Success) {
      llt.compute(floor_covariance(c.covariance.topLeftCorner(d, d)));
    }
    Vector z(d);
    for (int i = 0; i < d; ++i) z(i) = rng_.normal();
    const Vector x = c.mean.head(d) + Matrix(llt.matrixL()) * z;
    std::vector<double> unit(d);
    for (int i = 0; i < d; ++i) unit[i] = std::clamp(x(i), 0.0, 1.0);
    return space_.denormalize(unit);
  }

  // Records a finished episode. Triggers a fitting cycle when the episode
  // counter completes the bootstrap and every fitting_rate episodes after.
  void observe(const TaskParams& params, double raw_reward) {
    if (!space_.contains(params)) {
      throw std::invalid_argument("Teacher::observe: task parameters out of bounds");
    }
    const NormalizedReward reward =
        normalize_reward(raw_reward, config_.raw_reward_min, config_.raw_reward_max);
    HistoryEntry entry{RewardRecord{params, reward}, space_.normalize(params), next_seq_++};
    buffer_.push(entry);
    history_.push(std::move(entry));
    ++episodes_;
    ++stats_.episodes;
    const int bootstrap = config_.resolved_bootstrap();
    if (episodes_ >= bootstrap &&
        (episodes_ - bootstrap) % static_cast<std::int64_t>(config_.fitting_rate) == 0) {
      step_cycle();
    }
  }

  NormalizedReward normalize(double raw_reward) const {
    return normalize_reward(raw_reward, config_.raw_reward_min, config_.raw_reward_max);
  }

  // Recomputes the regularization state from the recent buffer: Off when the
  // mean raw normalized reward already meets r_b (and always for Random and
  // ALP-GMM), Active(alpha) from the bound condition otherwise.
  const RegularizationState& update_regularization_state() {
    if (kind_ != TeacherKind::Spalp || buffer_.size() == 0) {
      state_ = RegularizationState::off();
      return state_;
    }
    std::vector<double> rewards;
    rewards.reserve(buffer_.size());
    for (const auto& e : buffer_.entries()) rewards.push_back(e.record.reward.value());
    state_ = solve_alpha(std::span<const double>(rewards), RewardBound(config_.r_b));
    return state_;
  }

  double mean_recent_reward() const {
    if (buffer_.size() == 0) {
      throw InvalidStateError("Teacher::mean_recent_reward: no observations yet");
    }
    double sum = 0.0;
    for (const auto& e : buffer_.entries()) sum += e.record.reward.value();
    return sum / static_cast<double>(buffer_.size());
  }

  const RegularizationState& regularization_state() const { return state_; }
  const std::optional<GaussianMixture>& mixture() const { return mixture_; }
  const RecentBuffer& recent_buffer() const { return buffer_; }
  const RewardHistory& history() const { return history_; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  std::int64_t episodes() const { return episodes_; }
  const Stats& stats() const { return stats_; }

 private:
  static constexpr std::uint64_t kProposalStream = 0x50524f50ull;  // proposal rng stream tag
  static constexpr std::uint64_t kFitStreamBase = 0x46495400ull;   // per-cycle fit seed tag

  void validate_config() {
    if (config_.fitting_rate < 1) {
      throw std::invalid_argument("TeacherConfig: fitting_rate must be positive");
    }
    if (!(config_.p_random >= 0.0 && config_.p_random <= 1.0)) {
      throw std::invalid_argument("TeacherConfig: p_random must lie in [0, 1]");
    }
    if (config_.k_min < 1 || config_.k_min > config_.k_max) {
      throw std::invalid_argument("TeacherConfig: need 1 <= k_min <= k_max");
    }
    if (config_.resolved_bootstrap() < std::max(config_.k_max, 2)) {
      throw std::invalid_argument(
          "TeacherConfig: bootstrap_episodes must cover k_max so the first fit is feasible");
    }
    if (!(config_.raw_reward_min < config_.raw_reward_max)) {
      throw std::invalid_argument("TeacherConfig: raw reward range is empty");
    }
    if (config_.em_max_iter < 1 || config_.em_restarts < 1) {
      throw std::invalid_argument("TeacherConfig: EM iteration counts must be positive");
    }
    if (kind_ == TeacherKind::Spalp) {
      RewardBound validate(config_.r_b);  // throws outside (-1, 0)
    }
  }

  // One fitting cycle: refresh the regularization state, compute the ALP of
  // every buffered record against the history, refit the sampling mixture on
  // [normalized params ; ALP], and append a trace entry.
  void step_cycle() {
    update_regularization_state();
    const double mean_reward = mean_recent_reward();
    int k_selected = 0;
    if (kind_ != TeacherKind::Random) {
      const int d = space_.dims();
      std::vector<Vector> data;
      data.reserve(buffer_.size());
      for (const auto& e : buffer_.entries()) {
        Vector v(d + 1);
        for (int i = 0; i < d; ++i) v(i) = e.normalized[i];
        v(d) = compute_alp(e, history_, state_);
        data.push_back(std::move(v));
      }
      mixture_ = select_and_fit(data, config_.k_min, config_.k_max,
                                derive_seed(config_.seed, kFitStreamBase + cycle_index_),
                                config_.em_max_iter, &k_selected, config_.em_restarts);
    }
    trace_.push_back(TraceEntry{episodes_, state_, mean_reward, k_selected});
    ++cycle_index_;
  }

  TeacherKind kind_;
  ParamSpace space_;
  TeacherConfig config_;
  RecentBuffer buffer_;
  RewardHistory history_;
  Rng rng_;
  std::optional<GaussianMixture> mixture_;
  RegularizationState state_ = RegularizationState::off();
  std::vector<TraceEntry> trace_;
  std::int64_t episodes_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t cycle_index_ = 0;
  Stats stats_;
};

}  // namespace spalp

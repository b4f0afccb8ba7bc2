#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spalp/errors.hpp"
#include "spalp/teacher.hpp"
#include "spalp/toyenv.hpp"

namespace spalp {

struct RunConfig {
  std::int64_t episodes = 40000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::int64_t eval_every = 250;
  std::string out_dir = "out";
};

struct ExperimentConfig {
  ToyEnvConfig env;
  TeacherKind teacher_kind = TeacherKind::AlpGmm;
  TeacherConfig teacher;
  RunConfig run;

  void validate() const {
    env.validate();
    if (run.episodes <= teacher.resolved_bootstrap()) {
      throw ConfigError("run.episodes: must exceed teacher.bootstrap_episodes");
    }
    if (run.seeds.empty()) throw ConfigError("run.seeds: need at least one seed");
    if (run.eval_every < 1) throw ConfigError("run.eval_every: must be positive");
    if (teacher.fitting_rate < 1) throw ConfigError("teacher.fitting_rate: must be positive");
    if (!(teacher.p_random >= 0.0 && teacher.p_random <= 1.0)) {
      throw ConfigError("teacher.p_random: must lie in [0, 1]");
    }
    if (teacher.k_min < 1 || teacher.k_min > teacher.k_max) {
      throw ConfigError("teacher.k_min: need 1 <= k_min <= k_max");
    }
    if (teacher.resolved_bootstrap() < std::max(teacher.k_max, 2)) {
      throw ConfigError("teacher.bootstrap_episodes: must cover teacher.k_max");
    }
    if (teacher.em_max_iter < 1) throw ConfigError("teacher.em_max_iter: must be positive");
    if (teacher.em_restarts < 1) throw ConfigError("teacher.em_restarts: must be positive");
    if (teacher_kind == TeacherKind::Spalp && !(teacher.r_b > -1.0 && teacher.r_b < 0.0)) {
      throw ConfigError("teacher.r_b: must lie in (-1, 0)");
    }
  }
};

// ---------------------------------------------------------------------------
// Config file parsing: flat `key = value` lines with dotted section prefixes,
// '#' comments, blank lines ignored.
// ---------------------------------------------------------------------------

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected integer, got '" + value + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected number, got '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& value) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(value, ',')) {
    const auto t = trim(part);
    if (t.empty()) throw ConfigError(key + ": empty seed entry in '" + value + "'");
    seeds.push_back(static_cast<std::uint64_t>(parse_int(key, t)));
  }
  if (seeds.empty()) throw ConfigError(key + ": need at least one seed");
  return seeds;
}

inline TeacherKind parse_kind(const std::string& key, const std::string& value) {
  if (value == "random") return TeacherKind::Random;
  if (value == "alpgmm") return TeacherKind::AlpGmm;
  if (value == "spalp") return TeacherKind::Spalp;
  throw ConfigError(key + ": expected random|alpgmm|spalp, got '" + value + "'");
}

inline RewardShape parse_shape(const std::string& key, const std::string& value) {
  if (value == "linear") return RewardShape::Linear;
  if (value == "sigmoid") return RewardShape::Sigmoid;
  throw ConfigError(key + ": expected linear|sigmoid, got '" + value + "'");
}

}  // namespace detail

inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    out[key] = value;
  }
  return out;
}

inline ConfigMap load_config_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

inline ExperimentConfig config_from_map(const ConfigMap& kv) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "env.dims") {
      cfg.env.dims = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "env.cubes_per_dim") {
      cfg.env.cubes_per_dim = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "env.reward_shape") {
      cfg.env.reward_shape = detail::parse_shape(key, value);
    } else if (key == "env.transfer_learning") {
      cfg.env.transfer_learning = detail::parse_bool(key, value);
    } else if (key == "env.linear_step") {
      cfg.env.linear_step = detail::parse_double(key, value);
    } else if (key == "env.sigmoid_steepness") {
      cfg.env.sigmoid_steepness = detail::parse_double(key, value);
    } else if (key == "env.sigmoid_midpoint") {
      cfg.env.sigmoid_midpoint = detail::parse_double(key, value);
    } else if (key == "env.mastery_threshold") {
      cfg.env.mastery_threshold = detail::parse_double(key, value);
    } else if (key == "teacher.kind") {
      cfg.teacher_kind = detail::parse_kind(key, value);
    } else if (key == "teacher.fitting_rate") {
      cfg.teacher.fitting_rate = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "teacher.p_random") {
      cfg.teacher.p_random = detail::parse_double(key, value);
    } else if (key == "teacher.bootstrap_episodes") {
      cfg.teacher.bootstrap_episodes = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "teacher.r_b") {
      cfg.teacher.r_b = detail::parse_double(key, value);
    } else if (key == "teacher.history_capacity") {
      cfg.teacher.history_capacity =
          static_cast<std::size_t>(detail::parse_int(key, value));
    } else if (key == "teacher.k_min") {
      cfg.teacher.k_min = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "teacher.k_max") {
      cfg.teacher.k_max = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "teacher.em_max_iter") {
      cfg.teacher.em_max_iter = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "teacher.em_restarts") {
      cfg.teacher.em_restarts = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "run.episodes") {
      cfg.run.episodes = detail::parse_int(key, value);
    } else if (key == "run.seeds") {
      cfg.run.seeds = detail::parse_seeds(key, value);
    } else if (key == "run.eval_every") {
      cfg.run.eval_every = detail::parse_int(key, value);
    } else if (key == "run.out_dir") {
      cfg.run.out_dir = value;
    } else {
      throw ConfigError("unknown key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return config_from_map(load_config_map(path));
}

// ---------------------------------------------------------------------------
// Experiment runner.
// ---------------------------------------------------------------------------

struct MetricRow {
  std::string teacher;
  std::uint64_t seed = 0;
  std::int64_t episode = 0;
  double mastered_fraction = 0.0;
  RegularizationState alpha;
  double mean_reward = 0.0;
};

struct SeedRunResult {
  std::uint64_t seed = 0;
  std::vector<MetricRow> metrics;
  std::vector<TraceEntry> trace;
  std::vector<CubeGrid::CubeState> grid;
};

struct ExperimentResult {
  std::vector<MetricRow> metrics;  // all seeds, config order
  std::vector<SeedRunResult> per_seed;
};

inline SeedRunResult run_single_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  CubeGrid env(cfg.env);
  TeacherConfig tc = cfg.teacher;
  tc.seed = seed;
  tc.raw_reward_min = 0.0;  // toy environment reward range
  tc.raw_reward_max = 100.0;
  Teacher teacher(cfg.teacher_kind, ParamSpace::unit_box(cfg.env.dims), tc);

  SeedRunResult out;
  out.seed = seed;
  for (std::int64_t ep = 1; ep <= cfg.run.episodes; ++ep) {
    const TaskParams params = teacher.propose_task();
    const double reward = env.sample(params);
    teacher.observe(params, reward);
    if (ep % cfg.run.eval_every == 0) {
      out.metrics.push_back(MetricRow{to_string(cfg.teacher_kind), seed, ep,
                                      env.mastered_fraction(), teacher.regularization_state(),
                                      teacher.mean_recent_reward()});
    }
  }
  out.trace = teacher.trace();
  out.grid = env.snapshot();
  return out;
}

inline ExperimentResult run_experiment_full(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  for (const auto seed : cfg.run.seeds) {
    result.per_seed.push_back(run_single_seed(cfg, seed));
    const auto& rows = result.per_seed.back().metrics;
    result.metrics.insert(result.metrics.end(), rows.begin(), rows.end());
  }
  return result;
}

inline std::vector<MetricRow> run_experiment(const ExperimentConfig& cfg) {
  return run_experiment_full(cfg).metrics;
}

// ---------------------------------------------------------------------------
// Aggregation.
// ---------------------------------------------------------------------------

struct SummaryRow {
  std::string teacher;
  std::int64_t episode = 0;
  double mean = 0.0;
  double std_error = 0.0;
  int n_seeds = 0;
};

// Mean and standard error (sample sd / sqrt(n)) of mastered_fraction per
// (teacher, episode). A single seed reports standard error 0 with n_seeds 1.
inline std::vector<SummaryRow> aggregate(const std::vector<MetricRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no rows");
  std::map<std::pair<std::string, std::int64_t>, std::vector<double>> groups;
  for (const auto& r : rows) {
    groups[{r.teacher, r.episode}].push_back(r.mastered_fraction);
  }
  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (const auto& [key, values] : groups) {
    SummaryRow s;
    s.teacher = key.first;
    s.episode = key.second;
    s.n_seeds = static_cast<int>(values.size());
    double sum = 0.0;
    for (const double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
      double sq = 0.0;
      for (const double v : values) sq += (v - s.mean) * (v - s.mean);
      const double sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
      s.std_error = sd / std::sqrt(static_cast<double>(values.size()));
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV emission and parsing.
// ---------------------------------------------------------------------------

inline constexpr const char* kMetricsHeader = "teacher,seed,episode,mastered_fraction,alpha,mean_reward";
inline constexpr const char* kSummaryHeader = "teacher,episode,mean,stderr,n_seeds";
inline constexpr const char* kTraceHeader = "episode,alpha,mean_reward,k_selected";
inline constexpr const char* kGridHeader = "teacher,seed,cube,sample_count,reward,unlocked";

namespace detail {

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string alpha_field(const RegularizationState& state) {
  return state.is_active() ? fmt6(state.alpha()) : "off";
}

inline void write_file(const std::string& path, const std::string& contents) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << contents;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

inline std::string to_csv(const std::vector<MetricRow>& rows) {
  std::string out = kMetricsHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += r.teacher;
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.episode);
    out += ',';
    out += detail::fmt6(r.mastered_fraction);
    out += ',';
    out += detail::alpha_field(r.alpha);
    out += ',';
    out += detail::fmt6(r.mean_reward);
    out += '\n';
  }
  return out;
}

inline std::string to_csv(const std::vector<SummaryRow>& rows) {
  std::string out = kSummaryHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += r.teacher;
    out += ',';
    out += std::to_string(r.episode);
    out += ',';
    out += detail::fmt6(r.mean);
    out += ',';
    out += detail::fmt6(r.std_error);
    out += ',';
    out += std::to_string(r.n_seeds);
    out += '\n';
  }
  return out;
}

inline std::string to_csv(const std::vector<TraceEntry>& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& t : trace) {
    out += std::to_string(t.episode);
    out += ',';
    out += detail::alpha_field(t.state);
    out += ',';
    out += detail::fmt6(t.mean_reward);
    out += ',';
    out += std::to_string(t.k_selected);
    out += '\n';
  }
  return out;
}

inline std::string grid_to_csv(const std::string& teacher, std::uint64_t seed,
                               const std::vector<CubeGrid::CubeState>& grid) {
  std::string out = kGridHeader;
  out += '\n';
  for (const auto& cube : grid) {
    out += teacher;
    out += ',';
    out += std::to_string(seed);
    out += ',';
    for (std::size_t i = 0; i < cube.index.size(); ++i) {
      if (i > 0) out += '-';
      out += std::to_string(cube.index[i]);
    }
    out += ',';
    out += std::to_string(cube.sample_count);
    out += ',';
    out += detail::fmt6(cube.reward);
    out += ',';
    out += cube.unlocked ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline void emit_csv(const std::vector<MetricRow>& rows, const std::string& path) {
  detail::write_file(path, to_csv(rows));
}

inline void emit_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  detail::write_file(path, to_csv(rows));
}

inline std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw ConfigError("metrics csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw ConfigError("metrics csv: unexpected header '" + line + "'");
  std::vector<MetricRow> rows;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 6) throw ConfigError("metrics csv: malformed row '" + line + "'");
    MetricRow r;
    r.teacher = fields[0];
    r.seed = static_cast<std::uint64_t>(detail::parse_int("seed", fields[1]));
    r.episode = detail::parse_int("episode", fields[2]);
    r.mastered_fraction = detail::parse_double("mastered_fraction", fields[3]);
    r.alpha = fields[4] == "off"
                  ? RegularizationState::off()
                  : RegularizationState::active(detail::parse_double("alpha", fields[4]));
    r.mean_reward = detail::parse_double("mean_reward", fields[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read metrics file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_metrics_csv(buffer.str());
}

// Reads every CSV below `dir` whose header matches the raw metrics format,
// in sorted path order.
inline std::vector<MetricRow> read_metrics_dir(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("not a directory: " + dir);
  }
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<MetricRow> rows;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) continue;
    std::string header;
    std::getline(in, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != kMetricsHeader) continue;
    const auto file_rows = read_metrics_csv(path);
    rows.insert(rows.end(), file_rows.begin(), file_rows.end());
  }
  return rows;
}

// Writes all artifacts of one experiment into `dir`: metrics.csv plus one
// trace and one grid snapshot per seed.
inline void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                                     const std::string& dir) {
  const std::string kind = to_string(cfg.teacher_kind);
  const auto base = std::filesystem::path(dir);
  detail::write_file((base / "metrics.csv").string(), to_csv(result.metrics));
  for (const auto& seed_run : result.per_seed) {
    const std::string tag = kind + "_seed" + std::to_string(seed_run.seed);
    detail::write_file((base / ("trace_" + tag + ".csv")).string(), to_csv(seed_run.trace));
    detail::write_file((base / ("grid_" + tag + ".csv")).string(),
                       grid_to_csv(kind, seed_run.seed, seed_run.grid));
  }
}

}  // namespace spalp

#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "spalp/harness.hpp"

namespace spalp::cli {

namespace detail {

inline std::pair<double, double> mean_and_se(const std::vector<double>& xs) {
  double sum = 0.0;
  for (const double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double se = 0.0;
  if (xs.size() > 1) {
    double sq = 0.0;
    for (const double x : xs) sq += (x - mean) * (x - mean);
    se = std::sqrt(sq / static_cast<double>(xs.size() - 1)) /
         std::sqrt(static_cast<double>(xs.size()));
  }
  return {mean, se};
}

}  // namespace detail

inline void run_command(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
                        const std::string& out_dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!seeds.empty()) cfg.run.seeds = seeds;
  if (!out_dir.empty()) cfg.run.out_dir = out_dir;
  cfg.validate();
  const ExperimentResult result = run_experiment_full(cfg);
  write_experiment_outputs(cfg, result, cfg.run.out_dir);
  std::cout << "wrote " << (std::filesystem::path(cfg.run.out_dir) / "metrics.csv").string()
            << " (" << result.metrics.size() << " rows, " << result.per_seed.size()
            << " seeds)\n";
}

// One line per swept value: final and best-ever mastered fraction across seeds.
struct SweepValueSummary {
  std::string value;
  double final_mean = 0.0;
  double final_se = 0.0;
  double best_mean = 0.0;
  double best_se = 0.0;
  int n_seeds = 0;
};

inline std::string to_csv(const std::string& param, const std::vector<SweepValueSummary>& rows) {
  std::string out = "param,value,final_mean,final_stderr,best_mean,best_stderr,n_seeds\n";
  for (const auto& r : rows) {
    out += param;
    out += ',';
    out += r.value;
    out += ',';
    out += spalp::detail::fmt6(r.final_mean);
    out += ',';
    out += spalp::detail::fmt6(r.final_se);
    out += ',';
    out += spalp::detail::fmt6(r.best_mean);
    out += ',';
    out += spalp::detail::fmt6(r.best_se);
    out += ',';
    out += std::to_string(r.n_seeds);
    out += '\n';
  }
  return out;
}

inline std::vector<SweepValueSummary> sweep_command(const std::string& config_path,
                                                    const std::string& param,
                                                    const std::string& values_csv,
                                                    const std::string& out_dir) {
  const ConfigMap base = load_config_map(config_path);
  std::vector<std::string> values;
  for (const auto& part : spalp::detail::split(values_csv, ',')) {
    const auto v = spalp::detail::trim(part);
    if (!v.empty()) values.push_back(v);
  }
  if (values.empty()) throw ConfigError("sweep: --values is empty");

  std::vector<SweepValueSummary> summary;
  for (const auto& value : values) {
    ConfigMap kv = base;
    kv[param] = value;
    ExperimentConfig cfg = config_from_map(kv);
    cfg.run.out_dir = (std::filesystem::path(out_dir) / (param + "=" + value)).string();
    const ExperimentResult result = run_experiment_full(cfg);
    write_experiment_outputs(cfg, result, cfg.run.out_dir);

    SweepValueSummary row;
    row.value = value;
    row.n_seeds = static_cast<int>(result.per_seed.size());
    std::vector<double> finals;
    std::vector<double> bests;
    for (const auto& seed_run : result.per_seed) {
      double best = 0.0;
      for (const auto& m : seed_run.metrics) best = std::max(best, m.mastered_fraction);
      finals.push_back(seed_run.metrics.empty() ? 0.0
                                                : seed_run.metrics.back().mastered_fraction);
      bests.push_back(best);
    }
    std::tie(row.final_mean, row.final_se) = detail::mean_and_se(finals);
    std::tie(row.best_mean, row.best_se) = detail::mean_and_se(bests);
    summary.push_back(std::move(row));
    std::cout << param << "=" << value << ": final " << spalp::detail::fmt6(summary.back().final_mean)
              << " best " << spalp::detail::fmt6(summary.back().best_mean) << "\n";
  }
  spalp::detail::write_file((std::filesystem::path(out_dir) / "sweep_summary.csv").string(),
                            to_csv(param, summary));
  return summary;
}

inline void summarize_command(const std::string& in_dir, const std::string& out_file) {
  const auto rows = read_metrics_dir(in_dir);
  if (rows.empty()) throw IoError("summarize: no metrics CSV files under " + in_dir);
  emit_csv(aggregate(rows), out_file);
  std::cout << "wrote " << out_file << "\n";
}

inline int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Curriculum-learning benchmark harness (random / ALP-GMM / SPALP teachers)"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::string param;
  std::string values_csv;
  std::string in_dir;
  std::string out_file;

  auto* run_cmd = app.add_subcommand("run", "Run one experiment from a config file");
  run_cmd->add_option("--config", config_path, "Config file path")->required();
  run_cmd->add_option("--seed", seeds, "Seed overrides (repeatable)");
  run_cmd->add_option("--out", out_dir, "Output directory override");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run one sub-experiment per parameter value");
  sweep_cmd->add_option("--config", config_path, "Config file path")->required();
  sweep_cmd->add_option("--param", param, "Config key to sweep, e.g. teacher.r_b")->required();
  sweep_cmd->add_option("--values", values_csv, "Comma-separated values")->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* sum_cmd = app.add_subcommand("summarize", "Aggregate metrics CSVs into a summary");
  sum_cmd->add_option("--in", in_dir, "Directory holding raw metrics CSVs")->required();
  sum_cmd->add_option("--out", out_file, "Summary CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run_cmd->parsed()) {
      run_command(config_path, seeds, out_dir);
    } else if (sweep_cmd->parsed()) {
      sweep_command(config_path, param, values_csv, out_dir);
    } else if (sum_cmd->parsed()) {
      summarize_command(in_dir, out_file);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace spalp::cli

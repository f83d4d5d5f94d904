#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zdsc/cost_engine.hpp"
#include "zdsc/gauss.hpp"
#include "zdsc/harness.hpp"
#include "zdsc/optimizers.hpp"

namespace zdsc {

struct RunConfig {
  Method method = Method::da;
  // power_limit is filled from `power` or `csnr_db` after parsing.
  SourceChannelModel model;
  std::optional<double> power;
  std::optional<double> csnr_db;
  GridCounts grid_counts;
  AnnealConfig anneal;
  GreedyConfig greedy;
  // Fixed multiplier; when absent lambda is searched to meet the power.
  std::optional<double> lambda;
  // Explicit search bracket; when absent the bracket is hunted from the
  // linear stationary multiplier.
  std::optional<std::pair<double, double>> lambda_bracket;
  LambdaSearchOptions search;
  double bracket_factor = 2.0;
  std::size_t max_bracket_steps = 8;
  // Initialization seed for greedy/NCR and the duplication seed for DA.
  std::uint64_t seed = 1;
  // Restart seeds for greedy/NCR inside a sweep.
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double ncr_ratio = 30.0;
  std::size_t ncr_stages = 24;
  std::vector<Method> sweep_methods{Method::opta, Method::linear, Method::ncr, Method::da};
  std::vector<double> sweep_csnr_db{5.0, 8.0, 11.0};
  std::size_t threads = 0;
  std::string output_dir = "out";
  bool plots = true;

  bool operator==(const RunConfig&) const = default;
};

// Strict JSON parsing: unknown keys, missing required keys, malformed values
// and conflicting power/CSNR all throw ParseError naming the key.
RunConfig parse_config(const std::string& text);
// JSON with every field explicit; parse_config(serialize(c)) == c.
std::string serialize(const RunConfig& cfg);

SweepConfig sweep_config(const RunConfig& cfg);

struct RunResult {
  std::string method;
  CostReport report;
  std::optional<CurvePoint> point;
  std::vector<SweepRecord> sweep;
  std::size_t lambda_evaluations = 0;
  bool lambda_converged = true;
  std::vector<std::string> files;
  std::string config_echo;
  double wall_time_s = 0.0;
};

// Runs the configured method and writes result.json, encoder.csv,
// decoder.csv, trace.csv (and curve.csv for sweeps) into cfg.output_dir.
// Plots are emitted when cfg.plots is set.
RunResult run(const RunConfig& cfg);

// Writes encoder.svg, decoder.svg and curve.svg for whichever inputs exist in
// `dir`. Throws Error if none of encoder.csv, decoder.csv, curve.csv is there.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& dir);

// Write to a temporary sibling, then rename over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace zdsc

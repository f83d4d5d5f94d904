#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "zdsc/codec.hpp"
#include "zdsc/gauss.hpp"
#include "zdsc/optimizers.hpp"

namespace zdsc {

struct McEstimate {
  double distortion_hat = 0.0;
  double power_hat = 0.0;
  double distortion_stderr = 0.0;
  double power_stderr = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t rng_seed = 0;
};

// Samples (X, Z, N), encodes with g, decodes with the clamped bilinear table.
// Source samples beyond the encoder grid are clamped to its end points.
// Deterministic for a given seed regardless of the worker count.
McEstimate monte_carlo(const TabulatedEncoder& enc, const DecoderTable& dec,
                       const SourceChannelModel& model, std::size_t n_samples,
                       std::uint64_t seed);

double csnr_db(double power, double sigma_n2);
double snr_db(double sigma_x2, double distortion);
// Channel power giving the requested CSNR.
double power_from_csnr_db(double csnr, double sigma_n2);

// Number of sign changes in the first difference of a sampled function;
// differences with magnitude <= tol are skipped.
std::size_t derivative_sign_changes(const std::vector<double>& values, double tol = 1e-12);

// `sweep` is a driver mode and cannot appear inside a sweep.
enum class Method { opta, linear, greedy, ncr, da, sweep };

std::string to_string(Method m);
// Throws InvalidParameter on an unknown name.
Method method_from_string(const std::string& name);

struct CurvePoint {
  std::string method;
  double csnr_db = 0.0;
  double snr_db = 0.0;
  double lambda = 0.0;
  std::size_t effective_k = 1;
};

// One entry per (method, CSNR, seed). `point` is empty when the run failed.
struct SweepRecord {
  Method method = Method::opta;
  double target_csnr_db = 0.0;
  std::optional<std::uint64_t> seed;
  std::optional<CurvePoint> point;
  std::string error;
};

struct SweepConfig {
  AnnealConfig anneal;
  GreedyConfig greedy;
  // Restarts for greedy and NCR; DA runs once per point.
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double ncr_ratio = 30.0;
  std::size_t ncr_stages = 24;
  GridCounts grid_counts;
  LambdaSearchOptions search;
  // Bracket hunting starts at the linear stationary multiplier and moves by
  // this factor.
  double bracket_factor = 2.0;
  std::size_t max_bracket_steps = 8;
  // A fixed multiplier skips the search; an explicit bracket skips hunting.
  std::optional<double> lambda;
  std::optional<std::pair<double, double>> lambda_bracket;
  // 0 means ZDSC_THREADS, or all hardware threads when that is unset or 0.
  std::size_t threads = 0;
};

// Worker count honoring ZDSC_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count(std::size_t requested = 0);

// Runs fn(0..n-1) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

// Optimizer runs at a target power, with lambda searched to meet it. These are
// the building blocks of sweep and of the command-line driver.
LambdaSearchResult<AnnealResult> da_at_power(const SourceChannelModel& model, double power,
                                             const SweepConfig& cfg);
LambdaSearchResult<NcrResult> ncr_at_power(const SourceChannelModel& model, double power,
                                           std::uint64_t seed, const SweepConfig& cfg);
LambdaSearchResult<GreedyResult> greedy_at_power(const SourceChannelModel& model, double power,
                                                 std::uint64_t seed, const SweepConfig& cfg);

// `model.power_limit` is ignored; each point uses the power implied by its CSNR.
std::vector<SweepRecord> sweep(const std::vector<Method>& methods,
                               const std::vector<double>& csnr_points_db,
                               const SourceChannelModel& model, const SweepConfig& cfg);

}  // namespace zdsc

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "zdsc/codec.hpp"
#include "zdsc/cost_engine.hpp"
#include "zdsc/errors.hpp"
#include "zdsc/gauss.hpp"

namespace zdsc {

struct AnnealConfig {
  double t_init_factor = 2.0;
  double alpha = 0.95;
  double h_min = 1e-4;
  std::size_t k_max = 32;
  // Duplicates are displaced by up to perturb_scale * (|a| + sigma_N/sigma_X)
  // in slope and perturb_scale * (|b| + sigma_N) in offset.
  double perturb_scale = 3.0;
  // Relative to the parameter scale sigma_N + |a| sigma_X + |b|.
  double split_tol = 1e-3;
  double inner_tol = 1e-6;
  std::size_t max_inner_iters = 200;
  std::uint64_t rng_seed = 1;
  // Cooling stops early once T < t_floor_factor * T_init (only reachable
  // when no split ever happens, e.g. uninformative side information).
  double t_floor_factor = 1e-7;
  std::size_t init_fit_iters = 100;
  std::size_t polish_iters = 200;
  GridCounts grid_counts{};

  void validate() const;
  bool operator==(const AnnealConfig&) const = default;
};

struct GreedyConfig {
  double lambda = 0.0;
  double step_size = 50.0;
  std::size_t max_iters = 2000;
  double conv_tol = 1e-7;
  double backtrack_factor = 0.5;

  void validate() const;
  bool operator==(const GreedyConfig&) const = default;
};

struct TraceRecord {
  std::size_t outer_step = 0;
  double temperature = 0.0;
  std::size_t effective_k = 1;
  CostReport report;
  std::size_t inner_iterations = 0;
  // Free energy after every inner iteration of this outer step.
  std::vector<double> inner_free_energy;
  // Duplicate pairs merged back at the split check.
  std::size_t merged_pairs = 0;
};

struct OptimizationTrace {
  std::vector<TraceRecord> records;

  bool temperatures_non_increasing() const;
};

struct GreedyResult {
  TabulatedEncoder encoder;
  DecoderTable decoder;
  CostReport report;
  std::vector<double> j_trace;
  std::size_t iterations = 0;
  bool converged = false;
};

// Steepest descent on the tabulated encoder alternated with Bayes decoder
// updates. The grid set fixes the channel-output grid for the whole run.
GreedyResult greedy_descent(const TabulatedEncoder& init, const GreedyConfig& cfg,
                            const SourceChannelModel& model, const GridSet& grids);

struct NcrResult {
  TabulatedEncoder encoder;
  DecoderTable decoder;
  CostReport report;
  OptimizationTrace trace;
};

// Greedy descent along a decreasing lambda schedule, warm-starting each stage.
// Grids are rebuilt per stage so the channel-output grid covers the encoder.
NcrResult ncr(const std::vector<double>& lambda_schedule, const GreedyConfig& cfg,
              const TabulatedEncoder& init, const SourceChannelModel& model,
              const GridCounts& counts = {});

// Grid set whose channel-output grid covers the encoder with headroom.
GridSet grids_for_encoder(const SourceChannelModel& model, const TabulatedEncoder& enc,
                          const GridCounts& counts = {});

// Geometric schedule from lambda_target * ratio^(stages-1) down to lambda_target.
std::vector<double> ncr_schedule(double lambda_target, double ratio = 30.0,
                                 std::size_t stages = 24);

// Linear encoder for stage-zero NCR/greedy runs (seed 0) or a seeded random
// folded encoder with the same power budget (seed > 0).
TabulatedEncoder initial_encoder(const SourceChannelModel& model, const Grid1D& x_grid,
                                 std::uint64_t seed);

// Structured encoder plus the duplicate bookkeeping used during annealing.
struct AnnealState {
  StructuredEncoder encoder;
  // partner[k] is the index of k's duplicate, if k was duplicated this step.
  std::vector<std::optional<std::size_t>> partner;
};

// Scale used to normalise parameter distances: sigma_N + |a| sigma_X + |b|.
double parameter_scale(const AffineModel& m, const SourceChannelModel& model);
// Distance between two models in channel units at one source deviation.
double parameter_distance(const AffineModel& m1, const AffineModel& m2,
                          const SourceChannelModel& model);

AnnealState duplicate_and_perturb(const AnnealState& state, double perturb_scale,
                                  const SourceChannelModel& model, std::mt19937_64& rng);

struct SplitCheck {
  AnnealState state;
  std::size_t effective_k = 1;
  std::size_t merged_pairs = 0;
  std::size_t split_pairs = 0;
};

SplitCheck split_check(const AnnealState& state, double split_tol,
                       const SourceChannelModel& model);

struct AnnealResult {
  // State at the end of cooling (before the T = 0 quench).
  StructuredEncoder structured;
  // Hardened and polished encoder with its Bayes decoder.
  TabulatedEncoder hardened;
  DecoderTable decoder;
  CostReport report;
  OptimizationTrace trace;
  GridSet grids;
  std::size_t split_events = 0;
  std::size_t final_k = 1;
};

AnnealResult anneal(const AnnealConfig& cfg, double lambda, const SourceChannelModel& model);

struct LinearBaseline {
  TabulatedEncoder encoder;
  DecoderTable decoder;
  double distortion = 0.0;
};

LinearBaseline linear_baseline(const SourceChannelModel& model, double power,
                               const GridCounts& counts = {});

// Closed-form distortion of the linear encoder/decoder pair.
double linear_distortion(const SourceChannelModel& model, double power);

// Multiplier at which the linear mapping with the given power is stationary:
// lambda* = -dD_lin/dP.
double linear_stationary_lambda(const SourceChannelModel& model, double power);
// Inverse of linear_stationary_lambda: the power at which the linear mapping
// is stationary for the given multiplier (0 if lambda is too large).
double linear_power_for_lambda(const SourceChannelModel& model, double lambda);

double opta(const SourceChannelModel& model, double power);

// ---------------------------------------------------------------------------
// Lagrange multiplier search.

struct LambdaSearchOptions {
  double rel_tol = 0.02;
  std::size_t max_iters = 20;

  bool operator==(const LambdaSearchOptions&) const = default;
};

template <class Result>
struct LambdaSearchResult {
  double lambda = 0.0;
  double power = 0.0;
  Result result;
  std::size_t evaluations = 0;
  bool converged = false;
};

// Finds lambda with achieved power within rel_tol of target. The procedure
// returns (achieved power, result); achieved power must decrease with lambda.
// The bracket is split in log-lambda; the split point interpolates log power
// linearly and falls back to the midpoint when one side stalls.
template <class Result>
LambdaSearchResult<Result> lambda_search(
    double target_power, const std::function<std::pair<double, Result>(double)>& procedure,
    std::pair<double, double> bracket, const LambdaSearchOptions& opts = {}) {
  if (!(target_power > 0.0)) throw InvalidParameter("target power must be positive");
  double lo = bracket.first;
  double hi = bracket.second;
  if (!(lo > 0.0) || !(hi > lo)) throw InvalidParameter("bracket must satisfy 0 < lo < hi");

  std::size_t evals = 0;
  auto close = [&](double p) { return std::abs(p - target_power) / target_power < opts.rel_tol; };
  auto done = [&](double lambda, std::pair<double, Result>&& r, bool ok) {
    LambdaSearchResult<Result> out{lambda, r.first, std::move(r.second), evals, ok};
    return out;
  };

  auto r_lo = procedure(lo);
  ++evals;
  if (close(r_lo.first)) return done(lo, std::move(r_lo), true);
  auto r_hi = procedure(hi);
  ++evals;
  if (close(r_hi.first)) return done(hi, std::move(r_hi), true);
  if (!(r_lo.first > target_power && r_hi.first < target_power)) {
    throw BracketError("lambda bracket does not straddle the target power (P(lo)=" +
                           std::to_string(r_lo.first) + ", P(hi)=" +
                           std::to_string(r_hi.first) +
                           ", target=" + std::to_string(target_power) + ")",
                       r_lo.first, r_hi.first);
  }

  double p_lo = r_lo.first;
  double p_hi = r_hi.first;
  int last_side = 0;
  bool bisect_next = false;
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    const double llo = std::log(lo);
    const double lhi = std::log(hi);
    double mid = 0.5 * (llo + lhi);
    if (!bisect_next && p_hi > 0.0) {
      const double f_lo = std::log(p_lo / target_power);
      const double f_hi = std::log(p_hi / target_power);
      const double w = lhi - llo;
      mid = std::clamp(llo + w * f_lo / (f_lo - f_hi), llo + 0.05 * w, lhi - 0.05 * w);
    }
    const double lambda = std::exp(mid);
    auto r = procedure(lambda);
    ++evals;
    if (close(r.first)) return done(lambda, std::move(r), true);
    const int side = r.first > target_power ? 1 : -1;
    if (side > 0) {
      lo = lambda;
      p_lo = r.first;
    } else {
      hi = lambda;
      p_hi = r.first;
      r_hi = std::move(r);
    }
    // Two moves of the same endpoint in a row: take a plain bisection step.
    bisect_next = side == last_side && !bisect_next;
    last_side = side;
  }
  // Not converged: return the feasible side.
  return done(hi, std::move(r_hi), false);
}

// Bracket-finding front end for lambda_search. Starting from `guess`, lambda
// is multiplied or divided by `factor` until the achieved power straddles the
// target, then the bracket is handed to lambda_search. Evaluations are cached,
// so bracket endpoints are not recomputed.
template <class Result>
LambdaSearchResult<Result> lambda_search_from(
    double target_power, const std::function<std::pair<double, Result>(double)>& procedure,
    double guess, double factor = 2.0, std::size_t max_expansions = 8,
    const LambdaSearchOptions& opts = {}) {
  if (!(guess > 0.0) || !(factor > 1.0)) {
    throw InvalidParameter("lambda guess must be positive and factor > 1");
  }
  std::vector<std::pair<double, std::pair<double, Result>>> cache;
  std::size_t fresh = 0;
  const std::function<std::pair<double, Result>(double)> cached =
      [&](double lambda) -> std::pair<double, Result> {
    for (const auto& [l, r] : cache) {
      if (l == lambda) return r;
    }
    auto r = procedure(lambda);
    ++fresh;
    cache.emplace_back(lambda, r);
    return r;
  };
  auto close = [&](double p) { return std::abs(p - target_power) / target_power < opts.rel_tol; };

  double lambda = guess;
  double power = cached(lambda).first;
  if (close(power)) {
    LambdaSearchResult<Result> out{lambda, power, cached(lambda).second, fresh, true};
    return out;
  }
  const bool too_much = power > target_power;
  double other = lambda;
  for (std::size_t e = 0; e < max_expansions; ++e) {
    other = too_much ? other * factor : other / factor;
    const double p = cached(other).first;
    if (close(p) || (too_much ? p < target_power : p > target_power)) break;
  }
  const std::pair<double, double> bracket =
      too_much ? std::make_pair(lambda, other) : std::make_pair(other, lambda);
  auto out = lambda_search<Result>(target_power, cached, bracket, opts);
  out.evaluations = fresh;
  return out;
}

}  // namespace zdsc

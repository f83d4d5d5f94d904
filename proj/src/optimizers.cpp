#include "zdsc/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace zdsc {

namespace {

constexpr std::size_t kMaxHalvings = 12;
// Channel-output grids are sized to this multiple of the encoder amplitude.
constexpr double kGridHeadroom = 1.2;
// A duplicate whose mean association falls below this carries no region and
// is folded back into its partner at the split check.
constexpr double kDeadMass = 1e-6;

// One Gauss-Newton scaled descent step per local model, with backtracking on
// that model's weighted cost. Associations and decoder stay fixed, so the
// free energy cannot increase.
void update_models(StructuredEncoder& enc, const CostEngine& engine, const DecoderTable& dec,
                   double lambda) {
  for (std::size_t k = 0; k < enc.size(); ++k) {
    const auto weights = engine.model_weights(enc, k);
    const AffineModel m = enc.models[k];
    const ModelDerivatives der = engine.model_derivatives(m, weights, dec, lambda);
    const double ridge = 1e-10 * (der.h_aa + der.h_bb);
    const double haa = der.h_aa + ridge;
    const double hbb = der.h_bb + ridge;
    const double hab = der.h_ab;
    const double det = haa * hbb - hab * hab;
    if (!(det > 0.0) || !std::isfinite(det)) continue;  // model carries no weight
    const double ga = der.grad.d_a;
    const double gb = der.grad.d_b;
    const double da = -(hbb * ga - hab * gb) / det;
    const double db = -(haa * gb - hab * ga) / det;

    const double phi0 = engine.weighted_model_cost(m, weights, dec, lambda);
    double step = 1.0;
    for (std::size_t h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
      const AffineModel trial{m.a + step * da, m.b + step * db};
      if (engine.weighted_model_cost(trial, weights, dec, lambda) < phi0) {
        enc.models[k] = trial;
        break;
      }
    }
  }
}

struct InnerOutcome {
  std::vector<double> free_energy;
  std::size_t iterations = 0;
};

// Alternates parameter descent, Gibbs associations and the Bayes decoder at a
// fixed temperature until the relative free-energy decrease falls below tol.
// A decoder update that would raise F (possible through table interpolation)
// is rejected, so the recorded free energies never increase.
InnerOutcome relax(StructuredEncoder& enc, DecoderTable& dec, const CostEngine& engine,
                   double lambda, double temperature, double tol, std::size_t max_iters) {
  InnerOutcome out;
  Matrix costs = engine.per_model_costs(enc, dec, lambda);
  enc.assoc = gibbs_probs(costs, temperature);
  double f_prev = engine.report_from_costs(enc, costs, lambda, temperature).free_energy;
  {
    DecoderTable fresh = engine.bayes_decoder(enc);
    const Matrix fresh_costs = engine.per_model_costs(enc, fresh, lambda);
    const double f = engine.report_from_costs(enc, fresh_costs, lambda, temperature).free_energy;
    if (f <= f_prev) {
      dec = std::move(fresh);
      f_prev = f;
    }
  }
  out.free_energy.push_back(f_prev);

  for (std::size_t it = 0; it < max_iters; ++it) {
    update_models(enc, engine, dec, lambda);
    costs = engine.per_model_costs(enc, dec, lambda);
    enc.assoc = gibbs_probs(costs, temperature);
    const CostReport gibbs_report = engine.report_from_costs(enc, costs, lambda, temperature);
    double f = gibbs_report.free_energy;

    DecoderTable fresh = engine.bayes_decoder(enc);
    const Matrix fresh_costs = engine.per_model_costs(enc, fresh, lambda);
    const double f_fresh =
        engine.report_from_costs(enc, fresh_costs, lambda, temperature).free_energy;
    if (f_fresh <= f) {
      dec = std::move(fresh);
      f = f_fresh;
    }
    out.free_energy.push_back(f);
    out.iterations = it + 1;
    const double scale = std::max(std::abs(f_prev), gibbs_report.lagrangian);
    if (f_prev - f < tol * scale) break;
    f_prev = f;
  }
  return out;
}

// Free energy of the associations that the given costs induce at temperature.
double gibbs_free_energy(StructuredEncoder& enc, const Matrix& costs, const CostEngine& engine,
                         double lambda, double temperature) {
  enc.assoc = gibbs_probs(costs, temperature);
  return engine.report_from_costs(enc, costs, lambda, temperature).free_energy;
}

// A duplicate pair that relaxed into two distinct models is only a split if
// it beats the pair collapsed onto either member. Otherwise the copy takes the
// winner's parameters, so the split check merges it. The decoder is held
// fixed, which favours keeping the pair.
void collapse_unfavourable_pairs(AnnealState& state, const CostEngine& engine,
                                 const DecoderTable& dec, double lambda, double temperature) {
  StructuredEncoder& enc = state.encoder;
  Matrix costs = engine.per_model_costs(enc, dec, lambda);
  StructuredEncoder scratch = enc;
  double f_split = gibbs_free_energy(scratch, costs, engine, lambda, temperature);
  for (std::size_t m = 0; m < enc.size(); ++m) {
    if (m >= state.partner.size() || !state.partner[m]) continue;
    const std::size_t p = *state.partner[m];
    if (p <= m || p >= enc.size()) continue;
    double best = f_split;
    std::optional<std::size_t> winner;
    for (const std::size_t keep : {m, p}) {
      const std::size_t drop = keep == m ? p : m;
      Matrix trial = costs;
      std::copy(costs.row(keep).begin(), costs.row(keep).end(), trial.row(drop).begin());
      const double f = gibbs_free_energy(scratch, trial, engine, lambda, temperature);
      if (f <= best) {
        best = f;
        winner = keep;
      }
    }
    if (!winner) continue;
    const std::size_t drop = *winner == m ? p : m;
    enc.models[drop] = enc.models[*winner];
    std::copy(costs.row(*winner).begin(), costs.row(*winner).end(), costs.row(drop).begin());
    f_split = best;
  }
  enc.assoc = gibbs_probs(costs, temperature);
}

GridSet grids_with_amplitude(const SourceChannelModel& model, double amplitude,
                             const GridCounts& counts) {
  return default_grids(model, kGridHeadroom * amplitude, counts);
}

// Rebuilds the channel-output grid when the encoder outgrows it or uses less
// than half of it. Returns true if the grid changed.
bool refit_output_grid(const StructuredEncoder& enc, const SourceChannelModel& model,
                       const GridCounts& counts, CostEngine& engine, DecoderTable& dec) {
  const double need = effective_amplitude(enc, model.sigma_x());
  const double covered = engine.grids().y_grid.hi() - kTailSigmas * model.sigma_n();
  if (need <= covered && need >= 0.5 * covered) return false;
  engine = engine.with_y_grid(channel_output_grid(model, kGridHeadroom * need, counts.ny));
  dec = engine.bayes_decoder(enc);
  return true;
}

}  // namespace

void AnnealConfig::validate() const {
  if (!(t_init_factor > 0.0)) throw InvalidParameter("t_init_factor must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
  if (!(h_min > 0.0)) throw InvalidParameter("h_min must be positive");
  if (k_max < 1) throw InvalidParameter("k_max must be at least 1");
  if (!(perturb_scale > 0.0)) throw InvalidParameter("perturb_scale must be positive");
  if (!(split_tol > 0.0)) throw InvalidParameter("split_tol must be positive");
  if (!(inner_tol > 0.0)) throw InvalidParameter("inner_tol must be positive");
  if (max_inner_iters < 1) throw InvalidParameter("max_inner_iters must be at least 1");
  if (!(t_floor_factor > 0.0 && t_floor_factor < 1.0)) {
    throw InvalidParameter("t_floor_factor must lie in (0, 1)");
  }
}

void GreedyConfig::validate() const {
  if (!(lambda >= 0.0)) throw InvalidParameter("lambda must be non-negative");
  if (!(step_size > 0.0)) throw InvalidParameter("step_size must be positive");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
    throw InvalidParameter("backtrack_factor must lie in (0, 1)");
  }
  if (!(conv_tol >= 0.0)) throw InvalidParameter("conv_tol must be non-negative");
}

bool OptimizationTrace::temperatures_non_increasing() const {
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].temperature > records[r - 1].temperature) return false;
  }
  return true;
}

GreedyResult greedy_descent(const TabulatedEncoder& init, const GreedyConfig& cfg,
                            const SourceChannelModel& model, const GridSet& grids) {
  cfg.validate();
  const CostEngine engine(model, grids);
  TabulatedEncoder enc = init;
  DecoderTable dec = engine.bayes_decoder(enc);
  double j = engine.evaluate_costs(enc, dec, cfg.lambda).lagrangian;

  GreedyResult out{enc, dec, {}, {j}, 0, false};
  double mu = cfg.step_size;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const auto grad = engine.functional_gradient(enc, dec, cfg.lambda);
    bool moved = false;
    TabulatedEncoder trial = enc;
    double j_trial = j;
    for (std::size_t h = 0; h < kMaxHalvings; ++h) {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        trial.g_values[i] = enc.g_values[i] - mu * grad[i];
      }
      j_trial = engine.evaluate_costs(trial, dec, cfg.lambda).lagrangian;
      if (j_trial < j) {
        moved = true;
        break;
      }
      mu *= cfg.backtrack_factor;
    }
    out.iterations = it + 1;
    if (!moved) {
      out.converged = true;
      break;
    }
    enc = std::move(trial);
    DecoderTable fresh = engine.bayes_decoder(enc);
    const double j_fresh = engine.evaluate_costs(enc, fresh, cfg.lambda).lagrangian;
    if (j_fresh <= j_trial) {
      dec = std::move(fresh);
      j_trial = j_fresh;
    }
    const double decrease = (j - j_trial) / std::abs(j);
    j = j_trial;
    out.j_trace.push_back(j);
    if (decrease < cfg.conv_tol) {
      out.converged = true;
      break;
    }
    mu /= cfg.backtrack_factor;
  }
  out.report = engine.evaluate_costs(enc, dec, cfg.lambda);
  out.encoder = std::move(enc);
  out.decoder = std::move(dec);
  return out;
}

std::vector<double> ncr_schedule(double lambda_target, double ratio, std::size_t stages) {
  if (!(lambda_target > 0.0) || !(ratio > 1.0) || stages < 1) {
    throw InvalidParameter("ncr schedule needs lambda > 0, ratio > 1, stages >= 1");
  }
  std::vector<double> out(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    const double frac =
        stages == 1 ? 0.0
                    : static_cast<double>(stages - 1 - s) / static_cast<double>(stages - 1);
    out[s] = lambda_target * std::pow(ratio, frac);
  }
  out.back() = lambda_target;
  return out;
}

GridSet grids_for_encoder(const SourceChannelModel& model, const TabulatedEncoder& enc,
                          const GridCounts& counts) {
  return grids_with_amplitude(model, effective_amplitude(enc, model.sigma_x()), counts);
}

NcrResult ncr(const std::vector<double>& schedule, const GreedyConfig& cfg,
              const TabulatedEncoder& init, const SourceChannelModel& model,
              const GridCounts& counts) {
  if (schedule.empty()) throw InvalidParameter("empty lambda schedule");
  for (std::size_t s = 1; s < schedule.size(); ++s) {
    if (!(schedule[s] < schedule[s - 1])) {
      throw InvalidParameter("lambda schedule must be strictly decreasing");
    }
  }
  TabulatedEncoder enc = init;
  std::optional<GreedyResult> stage;
  OptimizationTrace trace;
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    GreedyConfig stage_cfg = cfg;
    stage_cfg.lambda = schedule[s];
    stage = greedy_descent(enc, stage_cfg, model, grids_for_encoder(model, enc, counts));
    enc = stage->encoder;
    TraceRecord rec;
    rec.outer_step = s;
    rec.temperature = 0.0;
    rec.effective_k = 1;
    rec.report = stage->report;
    rec.inner_iterations = stage->iterations;
    rec.inner_free_energy = stage->j_trace;
    trace.records.push_back(std::move(rec));
  }
  return NcrResult{std::move(stage->encoder), std::move(stage->decoder), stage->report,
                   std::move(trace)};
}

TabulatedEncoder initial_encoder(const SourceChannelModel& model, const Grid1D& x_grid,
                                 std::uint64_t seed) {
  model.validate();
  const double gain = std::sqrt(model.power_limit / model.sigma_x2);
  std::vector<double> g(x_grid.n());
  if (seed == 0) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = gain * x_grid[i];
    return TabulatedEncoder(x_grid, std::move(g));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double slope = 0.2 + 0.8 * unit(rng);
  const double fold = 0.3 + 0.7 * unit(rng);
  const double freq = (2.0 + 8.0 * unit(rng)) / model.sigma_x();
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = x_grid[i];
    g[i] = slope * x / model.sigma_x() + fold * std::sin(freq * x + phase);
  }
  // Scale to the power budget under the source density.
  std::vector<double> p2(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    p2[i] = g[i] * g[i] * gaussian_pdf(x_grid[i], 0.0, model.sigma_x2);
  }
  const double power = trapezoid(p2, x_grid);
  const double s = std::sqrt(model.power_limit / power);
  for (double& v : g) v *= s;
  return TabulatedEncoder(x_grid, std::move(g));
}

double parameter_scale(const AffineModel& m, const SourceChannelModel& model) {
  return model.sigma_n() + std::abs(m.a) * model.sigma_x() + std::abs(m.b);
}

double parameter_distance(const AffineModel& m1, const AffineModel& m2,
                          const SourceChannelModel& model) {
  const double da = (m1.a - m2.a) * model.sigma_x();
  const double db = m1.b - m2.b;
  return std::sqrt(da * da + db * db);
}

AnnealState duplicate_and_perturb(const AnnealState& state, double perturb_scale,
                                  const SourceChannelModel& model, std::mt19937_64& rng) {
  const StructuredEncoder& enc = state.encoder;
  const std::size_t k = enc.size();
  const std::size_t n = enc.x_grid.n();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::vector<AffineModel> models = enc.models;
  models.reserve(2 * k);
  for (std::size_t m = 0; m < k; ++m) {
    const AffineModel& parent = enc.models[m];
    const double ua = unit(rng);
    const double ub = unit(rng);
    AffineModel copy = parent;
    copy.a += ua * perturb_scale * (std::abs(parent.a) + model.sigma_n() / model.sigma_x());
    copy.b += ub * perturb_scale * (std::abs(parent.b) + model.sigma_n());
    models.push_back(copy);
  }
  Matrix assoc(2 * k, n);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      const double half = 0.5 * enc.assoc(m, i);
      assoc(m, i) = half;
      assoc(k + m, i) = half;
    }
  }
  AnnealState out{StructuredEncoder(std::move(models), std::move(assoc), enc.x_grid),
                  std::vector<std::optional<std::size_t>>(2 * k)};
  for (std::size_t m = 0; m < k; ++m) {
    out.partner[m] = k + m;
    out.partner[k + m] = m;
  }
  return out;
}

SplitCheck split_check(const AnnealState& state, double split_tol,
                       const SourceChannelModel& model) {
  const StructuredEncoder& enc = state.encoder;
  const std::size_t k = enc.size();
  const std::size_t n = enc.x_grid.n();
  std::vector<bool> keep(k, true);
  // merged_into[m] receives the association mass of m when m is dropped.
  std::vector<std::size_t> target(k);
  for (std::size_t m = 0; m < k; ++m) target[m] = m;

  std::vector<double> mass(k, 0.0);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t i = 0; i < n; ++i) mass[m] += enc.assoc(m, i);
    mass[m] /= static_cast<double>(n);
  }

  SplitCheck out{state, 0, 0, 0};
  for (std::size_t m = 0; m < k; ++m) {
    if (m >= state.partner.size() || !state.partner[m]) continue;
    const std::size_t p = *state.partner[m];
    if (p <= m || p >= k) continue;
    const double tol = split_tol * parameter_scale(enc.models[m], model);
    if (parameter_distance(enc.models[m], enc.models[p], model) < tol || mass[p] < kDeadMass) {
      keep[p] = false;
      target[p] = m;
      ++out.merged_pairs;
    } else if (mass[m] < kDeadMass) {
      // The parent lost all its points to the copy: keep the copy instead.
      keep[m] = false;
      target[m] = p;
      ++out.merged_pairs;
    } else {
      ++out.split_pairs;
    }
  }
  // Distinct models that have drifted onto each other are merged as well;
  // otherwise they would share their points forever.
  for (std::size_t m = 0; m < k; ++m) {
    if (!keep[m]) continue;
    const double tol = split_tol * parameter_scale(enc.models[m], model);
    for (std::size_t p = m + 1; p < k; ++p) {
      if (keep[p] && parameter_distance(enc.models[m], enc.models[p], model) < tol) {
        keep[p] = false;
        target[p] = m;
      }
    }
  }

  // Chains such as m -> p -> q are resolved to the surviving model.
  for (std::size_t m = 0; m < k; ++m) {
    while (!keep[target[m]]) target[m] = target[target[m]];
  }

  std::vector<std::size_t> new_index(k, 0);
  std::vector<AffineModel> models;
  for (std::size_t m = 0; m < k; ++m) {
    if (keep[m]) {
      new_index[m] = models.size();
      models.push_back(enc.models[m]);
    }
  }
  Matrix assoc(models.size(), n, 0.0);
  for (std::size_t m = 0; m < k; ++m) {
    const std::size_t row = new_index[target[m]];
    for (std::size_t i = 0; i < n; ++i) {
      assoc(row, i) = std::min(1.0, assoc(row, i) + enc.assoc(m, i));
    }
  }
  // Two models with the same output at a node are the same codeword there;
  // their shared mass goes to the dominant one (lower index on ties).
  for (std::size_t i = 0; i < n; ++i) {
    const double x = enc.x_grid[i];
    for (std::size_t r = 0; r < models.size(); ++r) {
      if (assoc(r, i) == 0.0) continue;
      const double gr = models[r].a * x + models[r].b;
      const double tol = split_tol * parameter_scale(models[r], model);
      for (std::size_t s = r + 1; s < models.size(); ++s) {
        if (assoc(s, i) == 0.0) continue;
        if (std::abs(models[s].a * x + models[s].b - gr) >= tol) continue;
        const bool to_r = assoc(r, i) >= assoc(s, i);
        const std::size_t from = to_r ? s : r;
        const std::size_t into = to_r ? r : s;
        assoc(into, i) = std::min(1.0, assoc(into, i) + assoc(from, i));
        assoc(from, i) = 0.0;
        if (!to_r) break;
      }
    }
  }

  out.effective_k = models.size();
  out.state = AnnealState{StructuredEncoder(std::move(models), std::move(assoc), enc.x_grid),
                          std::vector<std::optional<std::size_t>>(out.effective_k)};
  return out;
}

AnnealResult anneal(const AnnealConfig& cfg, double lambda, const SourceChannelModel& model) {
  cfg.validate();
  model.validate();
  if (!(lambda >= 0.0)) throw InvalidParameter("lambda must be non-negative");
  std::mt19937_64 rng(cfg.rng_seed);

  const double a0 = std::sqrt(model.power_limit / model.sigma_x2);
  const GridSet grids0 =
      grids_with_amplitude(model, a0 * kTailSigmas * model.sigma_x(), cfg.grid_counts);
  CostEngine engine(model, grids0);
  AnnealState state{StructuredEncoder::uniform({AffineModel{a0, 0.0}}, grids0.x_grid),
                    {std::nullopt}};
  DecoderTable dec = engine.bayes_decoder(state.encoder);

  // Single-model fit before cooling starts.
  relax(state.encoder, dec, engine, lambda, 1.0, cfg.inner_tol, cfg.init_fit_iters);
  refit_output_grid(state.encoder, model, cfg.grid_counts, engine, dec);
  const double j_init = engine.evaluate_costs(state.encoder, dec, lambda, 0.0).lagrangian;

  double temperature = cfg.t_init_factor * j_init;
  const double t_floor = temperature * cfg.t_floor_factor;
  AnnealResult result{state.encoder,
                      TabulatedEncoder(grids0.x_grid, std::vector<double>(grids0.x_grid.n())),
                      dec, {}, {}, engine.grids(), 0, 1};

  for (std::size_t step = 0;; ++step) {
    refit_output_grid(state.encoder, model, cfg.grid_counts, engine, dec);
    if (2 * state.encoder.size() <= cfg.k_max) {
      state = duplicate_and_perturb(state, cfg.perturb_scale, model, rng);
    }
    const InnerOutcome inner = relax(state.encoder, dec, engine, lambda, temperature,
                                     cfg.inner_tol, cfg.max_inner_iters);
    collapse_unfavourable_pairs(state, engine, dec, lambda, temperature);
    SplitCheck sc = split_check(state, cfg.split_tol, model);
    state = std::move(sc.state);
    result.split_events += sc.split_pairs;

    const Matrix costs = engine.per_model_costs(state.encoder, dec, lambda);
    TraceRecord rec;
    rec.outer_step = step;
    rec.temperature = temperature;
    rec.effective_k = sc.effective_k;
    rec.report = engine.report_from_costs(state.encoder, costs, lambda, temperature);
    rec.inner_iterations = inner.iterations;
    rec.inner_free_energy = inner.free_energy;
    rec.merged_pairs = sc.merged_pairs;
    const double entropy = rec.report.entropy;
    result.trace.records.push_back(std::move(rec));

    const bool cooled = sc.effective_k >= 2 && entropy < cfg.h_min;
    if (cooled || temperature < t_floor) break;
    temperature *= cfg.alpha;
  }

  // Quench: hard associations, then polish the hardened table.
  const Matrix costs = engine.per_model_costs(state.encoder, dec, lambda);
  const TabulatedEncoder hard = harden(state.encoder, costs);
  result.structured = state.encoder;
  result.final_k = state.encoder.size();

  GreedyConfig polish;
  polish.lambda = lambda;
  polish.max_iters = cfg.polish_iters;
  const GridSet final_grids = grids_for_encoder(model, hard, cfg.grid_counts);
  GreedyResult g = greedy_descent(hard, polish, model, final_grids);
  result.hardened = std::move(g.encoder);
  result.decoder = std::move(g.decoder);
  result.report = g.report;
  result.grids = final_grids;
  return result;
}

double linear_distortion(const SourceChannelModel& model, double power) {
  const double r = 1.0 - model.rho * model.rho;
  return model.sigma_x2 * r / (1.0 + (power / model.sigma_n2) * r);
}

double linear_stationary_lambda(const SourceChannelModel& model, double power) {
  const double r = 1.0 - model.rho * model.rho;
  const double denom = 1.0 + (power / model.sigma_n2) * r;
  return model.sigma_x2 * r * r / (model.sigma_n2 * denom * denom);
}

double linear_power_for_lambda(const SourceChannelModel& model, double lambda) {
  if (!(lambda > 0.0)) throw InvalidParameter("lambda must be positive");
  const double r = 1.0 - model.rho * model.rho;
  if (r == 0.0) return 0.0;
  const double root = std::sqrt(model.sigma_x2 * r * r / (model.sigma_n2 * lambda));
  return std::max(0.0, model.sigma_n2 / r * (root - 1.0));
}

LinearBaseline linear_baseline(const SourceChannelModel& model, double power,
                               const GridCounts& counts) {
  model.validate();
  if (!(power >= 0.0)) throw InvalidParameter("power must be non-negative");
  const double gain = std::sqrt(power / model.sigma_x2);
  const GridSet grids =
      default_grids(model, gain * kTailSigmas * model.sigma_x(), counts);
  std::vector<double> g(grids.x_grid.n());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = gain * grids.x_grid[i];

  // Linear MMSE of X from (Y, Z) with Y = gain X + N.
  const double sxz = model.rho * model.sigma_x() * model.sigma_z();
  const double c_xy = gain * model.sigma_x2;
  const double c_yy = gain * gain * model.sigma_x2 + model.sigma_n2;
  const double c_yz = gain * sxz;
  const double c_zz = model.sigma_z2;
  const double det = c_yy * c_zz - c_yz * c_yz;
  const double w_y = (c_xy * c_zz - sxz * c_yz) / det;
  const double w_z = (sxz * c_yy - c_xy * c_yz) / det;

  Matrix table(grids.y_grid.n(), grids.z_grid.n());
  for (std::size_t j = 0; j < grids.y_grid.n(); ++j) {
    for (std::size_t m = 0; m < grids.z_grid.n(); ++m) {
      table(j, m) = w_y * grids.y_grid[j] + w_z * grids.z_grid[m];
    }
  }
  return LinearBaseline{TabulatedEncoder(grids.x_grid, std::move(g)),
                        DecoderTable(grids.y_grid, grids.z_grid, std::move(table)),
                        linear_distortion(model, power)};
}

double opta(const SourceChannelModel& model, double power) {
  if (!(power >= 0.0)) throw InvalidParameter("power must be non-negative");
  return (1.0 - model.rho * model.rho) * model.sigma_x2 / (1.0 + power / model.sigma_n2);
}

}  // namespace zdsc

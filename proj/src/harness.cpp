#include "zdsc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "zdsc/errors.hpp"

namespace zdsc {

namespace {

constexpr std::size_t kChunk = 1 << 16;

struct Sums {
  double d = 0.0;
  double d2 = 0.0;
  double p = 0.0;
  double p2 = 0.0;
};

double stderr_of(double sum, double sum_sq, std::size_t n) {
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0));
  return std::sqrt(var / nn);
}

}  // namespace

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ZDSC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::min(std::max<std::size_t>(workers, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

McEstimate monte_carlo(const TabulatedEncoder& enc, const DecoderTable& dec,
                       const SourceChannelModel& model, std::size_t n_samples,
                       std::uint64_t seed) {
  if (n_samples < 100) throw InvalidParameter("monte carlo needs at least 100 samples");
  model.validate();
  const double sx = model.sigma_x();
  const double sz = model.sigma_z();
  const double sn = model.sigma_n();
  const double cond_sd = sz * std::sqrt(std::max(0.0, 1.0 - model.rho * model.rho));
  const double xlo = enc.x_grid.lo();
  const double xhi = enc.x_grid.hi();

  const std::size_t chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<Sums> partial(chunks);
  parallel_for(chunks, worker_count(), [&](std::size_t c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(n_samples, begin + kChunk);
    Sums s;
    for (std::size_t t = begin; t < end; ++t) {
      const double x = sx * normal(rng);
      const double z = model.rho * (sz / sx) * x + cond_sd * normal(rng);
      const double n = sn * normal(rng);
      const double g = encoder_eval(enc, std::clamp(x, xlo, xhi));
      const double err = x - decoder_eval(dec, g + n, z);
      const double d = err * err;
      const double p = g * g;
      s.d += d;
      s.d2 += d * d;
      s.p += p;
      s.p2 += p * p;
    }
    partial[c] = s;
  });

  Sums total;
  for (const Sums& s : partial) {
    total.d += s.d;
    total.d2 += s.d2;
    total.p += s.p;
    total.p2 += s.p2;
  }
  const double nn = static_cast<double>(n_samples);
  McEstimate out;
  out.distortion_hat = total.d / nn;
  out.power_hat = total.p / nn;
  out.distortion_stderr = stderr_of(total.d, total.d2, n_samples);
  out.power_stderr = stderr_of(total.p, total.p2, n_samples);
  out.n_samples = n_samples;
  out.rng_seed = seed;
  return out;
}

double csnr_db(double power, double sigma_n2) {
  if (!(power > 0.0) || !(sigma_n2 > 0.0)) {
    throw InvalidParameter("csnr_db needs positive power and noise variance");
  }
  return 10.0 * std::log10(power / sigma_n2);
}

double snr_db(double sigma_x2, double distortion) {
  if (!(sigma_x2 > 0.0) || !(distortion > 0.0)) {
    throw InvalidParameter("snr_db needs positive source variance and distortion");
  }
  return 10.0 * std::log10(sigma_x2 / distortion);
}

double power_from_csnr_db(double csnr, double sigma_n2) {
  if (!std::isfinite(csnr) || !(sigma_n2 > 0.0)) {
    throw InvalidParameter("power_from_csnr_db needs finite CSNR and positive noise variance");
  }
  return sigma_n2 * std::pow(10.0, csnr / 10.0);
}

std::size_t derivative_sign_changes(const std::vector<double>& values, double tol) {
  std::size_t changes = 0;
  int last = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = values[i] - values[i - 1];
    if (std::abs(d) <= tol) continue;
    const int s = d > 0.0 ? 1 : -1;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::opta: return "opta";
    case Method::linear: return "linear";
    case Method::greedy: return "greedy";
    case Method::ncr: return "ncr";
    case Method::da: return "da";
    case Method::sweep: return "sweep";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::opta, Method::linear, Method::greedy, Method::ncr, Method::da,
                   Method::sweep}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidParameter("unknown method '" + name + "'");
}

namespace {

SourceChannelModel at_power(SourceChannelModel model, double power) {
  model.power_limit = power;
  model.validate();
  return model;
}

double initial_lambda(const SourceChannelModel& model, double power) {
  const double guess = linear_stationary_lambda(model, power);
  return guess > 0.0 ? guess : 1e-6;
}

template <class Result>
LambdaSearchResult<Result> solve_lambda(
    const SourceChannelModel& model, double power, const SweepConfig& cfg,
    const std::function<std::pair<double, Result>(double)>& proc) {
  if (cfg.lambda) {
    auto r = proc(*cfg.lambda);
    const bool close = std::abs(r.first - power) / power < cfg.search.rel_tol;
    LambdaSearchResult<Result> out{*cfg.lambda, r.first, std::move(r.second), 1, close};
    return out;
  }
  if (cfg.lambda_bracket) {
    return lambda_search<Result>(power, proc, *cfg.lambda_bracket, cfg.search);
  }
  return lambda_search_from<Result>(power, proc, initial_lambda(model, power),
                                    cfg.bracket_factor, cfg.max_bracket_steps, cfg.search);
}

}  // namespace

LambdaSearchResult<AnnealResult> da_at_power(const SourceChannelModel& model, double power,
                                             const SweepConfig& cfg) {
  const SourceChannelModel m = at_power(model, power);
  AnnealConfig ac = cfg.anneal;
  ac.grid_counts = cfg.grid_counts;
  const std::function<std::pair<double, AnnealResult>(double)> proc = [&](double lambda) {
    AnnealResult r = anneal(ac, lambda, m);
    const double p = r.report.power;
    return std::make_pair(p, std::move(r));
  };
  return solve_lambda<AnnealResult>(m, power, cfg, proc);
}

LambdaSearchResult<NcrResult> ncr_at_power(const SourceChannelModel& model, double power,
                                           std::uint64_t seed, const SweepConfig& cfg) {
  const SourceChannelModel m = at_power(model, power);
  const GridSet grids = default_grids(m, std::sqrt(power / m.sigma_x2) * kTailSigmas *
                                             m.sigma_x(), cfg.grid_counts);
  const TabulatedEncoder init = initial_encoder(m, grids.x_grid, seed);
  const std::function<std::pair<double, NcrResult>(double)> proc = [&](double lambda) {
    NcrResult r = ncr(ncr_schedule(lambda, cfg.ncr_ratio, cfg.ncr_stages), cfg.greedy, init, m,
                      cfg.grid_counts);
    const double p = r.report.power;
    return std::make_pair(p, std::move(r));
  };
  return solve_lambda<NcrResult>(m, power, cfg, proc);
}

LambdaSearchResult<GreedyResult> greedy_at_power(const SourceChannelModel& model, double power,
                                                 std::uint64_t seed, const SweepConfig& cfg) {
  const SourceChannelModel m = at_power(model, power);
  const GridSet grids0 = default_grids(m, std::sqrt(power / m.sigma_x2) * kTailSigmas *
                                              m.sigma_x(), cfg.grid_counts);
  const TabulatedEncoder init = initial_encoder(m, grids0.x_grid, seed);
  const GridSet grids = grids_for_encoder(m, init, cfg.grid_counts);
  const std::function<std::pair<double, GreedyResult>(double)> proc = [&](double lambda) {
    GreedyConfig gc = cfg.greedy;
    gc.lambda = lambda;
    GreedyResult r = greedy_descent(init, gc, m, grids);
    const double p = r.report.power;
    return std::make_pair(p, std::move(r));
  };
  return solve_lambda<GreedyResult>(m, power, cfg, proc);
}

std::vector<SweepRecord> sweep(const std::vector<Method>& methods,
                               const std::vector<double>& csnr_points_db,
                               const SourceChannelModel& model, const SweepConfig& cfg) {
  for (Method method : methods) {
    if (method == Method::sweep) throw InvalidParameter("a sweep cannot contain a sweep");
  }
  std::vector<SweepRecord> records;
  for (Method method : methods) {
    for (double csnr : csnr_points_db) {
      if (method == Method::greedy || method == Method::ncr) {
        for (std::uint64_t seed : cfg.seeds) records.push_back({method, csnr, seed, {}, {}});
      } else {
        records.push_back({method, csnr, std::nullopt, {}, {}});
      }
    }
  }

  parallel_for(records.size(), worker_count(cfg.threads), [&](std::size_t r) {
    SweepRecord& rec = records[r];
    try {
      const double power = power_from_csnr_db(rec.target_csnr_db, model.sigma_n2);
      const SourceChannelModel m = at_power(model, power);
      CurvePoint pt;
      pt.method = to_string(rec.method);
      switch (rec.method) {
        case Method::opta: {
          const double r1 = 1.0 - m.rho * m.rho;
          const double q = 1.0 + power / m.sigma_n2;
          pt.csnr_db = csnr_db(power, m.sigma_n2);
          pt.snr_db = snr_db(m.sigma_x2, opta(m, power));
          pt.lambda = r1 * m.sigma_x2 / (m.sigma_n2 * q * q);
          break;
        }
        case Method::linear:
          pt.csnr_db = csnr_db(power, m.sigma_n2);
          pt.snr_db = snr_db(m.sigma_x2, linear_distortion(m, power));
          pt.lambda = linear_stationary_lambda(m, power);
          break;
        case Method::da: {
          const auto res = da_at_power(m, power, cfg);
          pt.csnr_db = csnr_db(res.power, m.sigma_n2);
          pt.snr_db = snr_db(m.sigma_x2, res.result.report.distortion);
          pt.lambda = res.lambda;
          pt.effective_k = res.result.final_k;
          break;
        }
        case Method::ncr: {
          const auto res = ncr_at_power(m, power, *rec.seed, cfg);
          pt.csnr_db = csnr_db(res.power, m.sigma_n2);
          pt.snr_db = snr_db(m.sigma_x2, res.result.report.distortion);
          pt.lambda = res.lambda;
          break;
        }
        case Method::greedy: {
          const auto res = greedy_at_power(m, power, *rec.seed, cfg);
          pt.csnr_db = csnr_db(res.power, m.sigma_n2);
          pt.snr_db = snr_db(m.sigma_x2, res.result.report.distortion);
          pt.lambda = res.lambda;
          break;
        }
        case Method::sweep:
          throw InvalidParameter("a sweep cannot contain a sweep");
      }
      rec.point = pt;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  });
  return records;
}

}  // namespace zdsc

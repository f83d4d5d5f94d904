#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "zdsc/errors.hpp"
#include "zdsc/harness.hpp"
#include "zdsc/optimizers.hpp"

using namespace zdsc;

namespace {

SourceChannelModel make_model(double rho, double power) {
  SourceChannelModel m;
  m.rho = rho;
  m.power_limit = power;
  return m;
}

const GridCounts kCoarse{81, 33, 49, 25};

bool non_increasing(const std::vector<double>& v, double tol = 0.0) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] + tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("opta and linear distortion formulas") {
  CHECK(opta(make_model(0.0, 1.0), 1.0) == doctest::Approx(0.5));
  const SourceChannelModel m = make_model(0.99, 12.531);
  CHECK(opta(m, 12.531) == doctest::Approx(1.4707e-3).epsilon(1e-4));
  CHECK(snr_db(1.0, opta(m, 12.531)) == doctest::Approx(28.32).epsilon(0.005 / 28.32));
  CHECK(opta(m, 0.0) == doctest::Approx(1.0 - 0.99 * 0.99));

  CHECK(linear_distortion(make_model(0.0, 1.0), 1.0) == doctest::Approx(0.5));
  CHECK(linear_distortion(m, 12.531) == doctest::Approx(0.01593).epsilon(1e-3));
  CHECK(linear_distortion(make_model(1.0, 1.0), 1.0) == 0.0);
  for (double p : {0.5, 3.0, 20.0}) CHECK(opta(m, p) < linear_distortion(m, p));
}

TEST_CASE("linear stationary multiplier and its inverse") {
  const SourceChannelModel m0 = make_model(0.0, 1.0);
  CHECK(linear_stationary_lambda(m0, 1.0) == doctest::Approx(0.25));
  const SourceChannelModel m = make_model(0.99, 1.0);
  for (double p : {1.0, 5.0, 12.531}) {
    // lambda* = -dD/dP by central difference of the closed form.
    const double h = 1e-5 * p;
    const double slope = (linear_distortion(m, p + h) - linear_distortion(m, p - h)) / (2 * h);
    CHECK(linear_stationary_lambda(m, p) == doctest::Approx(-slope).epsilon(1e-6));
    CHECK(linear_power_for_lambda(m, linear_stationary_lambda(m, p)) ==
          doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(linear_power_for_lambda(m, 10.0) == 0.0);
}

TEST_CASE("linear baseline") {
  const LinearBaseline a = linear_baseline(make_model(0.0, 1.0), 1.0);
  CHECK(a.distortion == doctest::Approx(0.5));
  const LinearBaseline b = linear_baseline(make_model(0.99, 12.531), 12.531);
  CHECK(b.distortion == doctest::Approx(0.01593).epsilon(1e-3));
  CHECK(snr_db(1.0, b.distortion) == doctest::Approx(17.98).epsilon(1e-3));
  CHECK(linear_baseline(make_model(1.0, 1.0), 1.0).distortion == 0.0);
  CHECK(b.encoder.g_values[150] == doctest::Approx(std::sqrt(12.531) * b.encoder.x_grid[150]));
}

TEST_CASE("greedy descent from the stationary linear encoder") {
  const SourceChannelModel m = make_model(0.99, 5.0);
  const LinearBaseline lin = linear_baseline(m, 5.0);
  GreedyConfig cfg;
  cfg.lambda = linear_stationary_lambda(m, 5.0);
  const GridSet gs = grids_for_encoder(m, lin.encoder);
  const GreedyResult r = greedy_descent(lin.encoder, cfg, m, gs);
  REQUIRE(!r.j_trace.empty());
  CHECK(r.iterations <= 50);
  CHECK(std::abs(r.report.lagrangian - r.j_trace.front()) <= 0.005 * r.j_trace.front());
  CHECK(non_increasing(r.j_trace));
  CHECK(r.report.lagrangian <= r.j_trace.front() + 1e-12);
}

TEST_CASE("greedy descent with a large multiplier drives power to zero") {
  const SourceChannelModel m = make_model(0.9, 1.0);
  for (std::uint64_t seed : {0u, 1u}) {
    const TabulatedEncoder init =
        seed == 0 ? TabulatedEncoder(Grid1D(-5, 5, 201), std::vector<double>(201, 0.0))
                  : initial_encoder(m, Grid1D(-5, 5, 201), seed);
    GreedyConfig cfg;
    cfg.lambda = 10.0;
    const GreedyResult r = greedy_descent(init, cfg, m, grids_for_encoder(m, init));
    CHECK(r.report.power < 0.01);
    CHECK(non_increasing(r.j_trace));
  }
}

TEST_CASE("greedy configuration validation") {
  GreedyConfig cfg;
  cfg.step_size = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg.step_size = 1.0;
  cfg.backtrack_factor = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
}

TEST_CASE("ncr schedule and staging") {
  const auto s = ncr_schedule(1e-3, 100.0, 5);
  REQUIRE(s.size() == 5);
  CHECK(s.front() == doctest::Approx(0.1));
  CHECK(s.back() == doctest::Approx(1e-3));
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] / s[i - 1] == doctest::Approx(s[1] / s[0]));

  const SourceChannelModel m = make_model(0.99, 8.0);
  const TabulatedEncoder init = initial_encoder(m, Grid1D(-5, 5, 201), 3);
  GreedyConfig cfg;
  cfg.lambda = 5e-3;
  const NcrResult one = ncr({5e-3}, cfg, init, m);
  const GreedyResult g = greedy_descent(init, cfg, m, grids_for_encoder(m, init));
  CHECK(one.encoder.g_values == g.encoder.g_values);
  CHECK(one.report.lagrangian == g.report.lagrangian);

  const NcrResult staged = ncr(s, cfg, init, m);
  REQUIRE(staged.trace.records.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(staged.trace.records[i].report.lambda == s[i]);
    CHECK(non_increasing(staged.trace.records[i].inner_free_energy));
  }
  CHECK_THROWS_AS(ncr({}, cfg, init, m), InvalidParameter);
  CHECK_THROWS_AS(ncr({1e-3, 1e-2}, cfg, init, m), InvalidParameter);
}

TEST_CASE("ncr beats cold-started greedy at the target multiplier") {
  const SourceChannelModel m = make_model(0.99, power_from_csnr_db(10.0, 1.0));
  const double lambda = 3e-4;
  const auto schedule = ncr_schedule(lambda);
  GreedyConfig cfg;
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TabulatedEncoder init = initial_encoder(m, Grid1D(-5, 5, 201), seed);
    const NcrResult n = ncr(schedule, cfg, init, m);
    GreedyConfig g = cfg;
    g.lambda = lambda;
    const GreedyResult cold = greedy_descent(init, g, m, grids_for_encoder(m, init));
    if (n.report.lagrangian <= cold.report.lagrangian) ++wins;
  }
  CHECK(wins >= 3);
}

TEST_CASE("initial encoders meet the power budget") {
  const SourceChannelModel m = make_model(0.99, 6.0);
  const Grid1D g(-5, 5, 201);
  const TabulatedEncoder lin = initial_encoder(m, g, 0);
  CHECK(lin.g_values[200] == doctest::Approx(5.0 * std::sqrt(6.0)));
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const TabulatedEncoder e = initial_encoder(m, g, seed);
    std::vector<double> p(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) p[i] = e.g_values[i] * e.g_values[i] * gaussian_pdf(g[i], 0, 1);
    CHECK(trapezoid(p, g) == doctest::Approx(6.0));
    CHECK(e.g_values == initial_encoder(m, g, seed).g_values);
  }
  CHECK(initial_encoder(m, g, 1).g_values != initial_encoder(m, g, 2).g_values);
}

TEST_CASE("duplicate and perturb") {
  const SourceChannelModel m = make_model(0.99, 10.0);
  const Grid1D g(-5, 5, 21);
  const AnnealState one{StructuredEncoder::uniform({{3.0, 0.5}}, g), {std::nullopt}};
  const double ps = 0.01;
  std::mt19937_64 rng(42);
  const AnnealState two = duplicate_and_perturb(one, ps, m, rng);
  REQUIRE(two.encoder.size() == 2);
  const double scale = std::abs(3.0) + m.sigma_n() / m.sigma_x();
  CHECK(std::abs(two.encoder.models[0].a - two.encoder.models[1].a) <= 2 * ps * scale);
  for (std::size_t i = 0; i < g.n(); ++i) {
    CHECK(two.encoder.assoc(0, i) == doctest::Approx(0.5));
    CHECK(two.encoder.assoc(1, i) == doctest::Approx(0.5));
  }
  REQUIRE(two.partner.size() == 2);
  CHECK(two.partner[0] == std::optional<std::size_t>(1));

  std::mt19937_64 rng2(42);
  const AnnealState again = duplicate_and_perturb(one, ps, m, rng2);
  CHECK(again.encoder.models == two.encoder.models);
}

TEST_CASE("split check") {
  const SourceChannelModel m = make_model(0.99, 10.0);
  const Grid1D g(-5, 5, 21);
  const double tol = 1e-3;

  const AnnealState same{StructuredEncoder::uniform({{2.0, 0.1}, {2.0, 0.1}}, g), {1, std::nullopt}};
  const SplitCheck merged = split_check(same, tol, m);
  CHECK(merged.effective_k == 1);
  CHECK(merged.merged_pairs == 1);
  for (std::size_t i = 0; i < g.n(); ++i) CHECK(merged.state.encoder.assoc(0, i) == doctest::Approx(1.0));

  const AffineModel base{2.0, 0.1};
  const double d = 10.0 * tol * parameter_scale(base, m);
  const AnnealState apart{
      StructuredEncoder::uniform({base, {base.a, base.b + d}}, g), {1, std::nullopt}};
  const SplitCheck kept = split_check(apart, tol, m);
  CHECK(kept.effective_k == 2);
  CHECK(kept.split_pairs == 1);
  CHECK(kept.merged_pairs == 0);
}

TEST_CASE("lambda search") {
  const SourceChannelModel unit = make_model(0.0, 1.0);
  const std::function<std::pair<double, int>(double)> linear = [&](double l) {
    return std::make_pair(linear_power_for_lambda(unit, l), 0);
  };
  const auto r = lambda_search<int>(1.0, linear, {0.05, 0.9});
  CHECK(r.converged);
  CHECK(r.lambda == doctest::Approx(0.25).epsilon(0.05));

  int calls = 0;
  const std::function<std::pair<double, int>(double)> inv = [&](double l) {
    ++calls;
    return std::make_pair(1.0 / l, 0);
  };
  const auto exact = lambda_search<int>(2.0, inv, {0.5, 10.0});
  CHECK(exact.lambda == 0.5);
  CHECK(exact.evaluations == 1);
  CHECK(calls == 1);

  const auto half = lambda_search<int>(0.5, inv, {0.1, 100.0});
  CHECK(half.lambda == doctest::Approx(2.0).epsilon(0.02));
  CHECK(std::abs(1.0 / half.lambda - 0.5) / 0.5 < 0.02);

  CHECK_THROWS_AS(lambda_search<int>(0.5, inv, {10.0, 100.0}), BracketError);
  try {
    lambda_search<int>(0.5, inv, {10.0, 100.0});
  } catch (const BracketError& e) {
    CHECK(e.power_lo() == doctest::Approx(0.1));
    CHECK(e.power_hi() == doctest::Approx(0.01));
  }

  const auto hunted = lambda_search_from<int>(0.5, inv, 0.01);
  CHECK(hunted.converged);
  CHECK(hunted.lambda == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("anneal configuration validation") {
  AnnealConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = {};
  c.h_min = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = {};
  c.k_max = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = {};
  c.perturb_scale = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
}

TEST_CASE("anneal invariants on coarse grids") {
  const SourceChannelModel m = make_model(0.99, power_from_csnr_db(10.0, 1.0));
  AnnealConfig cfg;
  cfg.grid_counts = kCoarse;
  const AnnealResult a = anneal(cfg, 3e-4, m);
  const auto& recs = a.trace.records;
  REQUIRE(recs.size() > 2);
  for (std::size_t s = 1; s < recs.size(); ++s) {
    CHECK(recs[s].temperature == doctest::Approx(cfg.alpha * recs[s - 1].temperature).epsilon(1e-12));
    CHECK(recs[s].temperature < recs[s - 1].temperature);
  }
  CHECK(a.trace.temperatures_non_increasing());
  for (const auto& r : recs) CHECK(non_increasing(r.inner_free_energy));
  CHECK(recs.back().report.entropy < cfg.h_min);
  CHECK(recs.front().effective_k == 1);
  CHECK(a.split_events > 0);
  CHECK(a.report.distortion >= opta(m, a.report.power) - 1e-9);
  CHECK(a.report.distortion <= linear_distortion(m, a.report.power));

  const AnnealResult b = anneal(cfg, 3e-4, m);
  REQUIRE(b.trace.records.size() == recs.size());
  for (std::size_t s = 0; s < recs.size(); ++s) {
    CHECK(b.trace.records[s].report.free_energy == recs[s].report.free_energy);
    CHECK(b.trace.records[s].inner_free_energy == recs[s].inner_free_energy);
  }
  CHECK(b.hardened.g_values == a.hardened.g_values);
}

TEST_CASE("anneal without side information gives a monotone encoder") {
  const SourceChannelModel m = make_model(0.0, power_from_csnr_db(10.0, 1.0));
  AnnealConfig cfg;
  cfg.grid_counts = kCoarse;
  const AnnealResult a = anneal(cfg, linear_stationary_lambda(m, m.power_limit), m);
  CHECK(derivative_sign_changes(a.hardened.g_values, 1e-9) == 0);
  // Without side information the linear mapping meets the bound, so the
  // 5-sigma source truncation sets the attainable floor.
  const LinearBaseline lin = linear_baseline(m, m.power_limit, kCoarse);
  const GridSet lg = grids_for_encoder(m, lin.encoder, kCoarse);
  const CostEngine le(m, lg);
  const CostReport lr = le.evaluate_costs(lin.encoder, le.bayes_decoder(lin.encoder), 0.0);
  const double floor = std::abs(lr.distortion - opta(m, lr.power));
  CHECK(a.report.distortion >= opta(m, a.report.power) - 2.0 * floor);
}

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "zdsc/cost_engine.hpp"
#include "zdsc/harness.hpp"
#include "zdsc/optimizers.hpp"

using namespace zdsc;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SourceChannelModel benchmark(double power) {
  SourceChannelModel m;
  m.rho = 0.99;
  m.power_limit = power;
  return m;
}

void opta_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const double power = 12.531;
  const double d = opta(benchmark(power), power);
  const double secs = seconds_since(t0);
  const double oracle = (1.0 - 0.99 * 0.99) / (1.0 + power);
  const double rel = std::abs(d - oracle) / oracle;
  const double snr = snr_db(1.0, d);
  const bool ok = rel < 1e-6 && std::abs(d - 1.4707e-3) < 5e-8 && std::abs(snr - 28.32) < 0.005 &&
                  secs < 1.0;
  report(1, "OPTA reproduction", ok,
         fmt("D=%.6e (closed form rel err %.1e), SNR=%.4f dB, %.3f s", d, rel, snr, secs));
}

void linear_baseline_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const double power = 12.531;
  const SourceChannelModel m = benchmark(power);
  const LinearBaseline lin = linear_baseline(m, power);
  const GridSet grids = grids_for_encoder(m, lin.encoder);
  const CostEngine engine(m, grids);
  const CostReport r = engine.evaluate_costs(lin.encoder, engine.bayes_decoder(lin.encoder), 0.0);
  const double secs = seconds_since(t0);
  const double closed = linear_distortion(m, power);
  const double rel = std::abs(r.distortion - closed) / closed;
  const double snr = snr_db(1.0, r.distortion);
  const bool ok = std::abs(closed - 0.01593) < 5e-6 && rel < 0.01 && std::abs(snr - 17.98) <= 0.05 &&
                  secs < 10.0;
  report(2, "linear baseline oracle", ok,
         fmt("quadrature D=%.6e vs closed form %.6e (rel %.2e), SNR=%.3f dB, %.2f s",
             r.distortion, closed, rel, snr, secs));
}

bool traces_identical(const OptimizationTrace& a, const OptimizationTrace& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t s = 0; s < a.records.size(); ++s) {
    const TraceRecord& x = a.records[s];
    const TraceRecord& y = b.records[s];
    if (x.temperature != y.temperature || x.effective_k != y.effective_k ||
        x.merged_pairs != y.merged_pairs || x.inner_iterations != y.inner_iterations ||
        x.inner_free_energy != y.inner_free_energy || x.report.distortion != y.report.distortion ||
        x.report.power != y.report.power || x.report.entropy != y.report.entropy ||
        x.report.free_energy != y.report.free_energy) {
      return false;
    }
  }
  return true;
}

void annealing(const SweepConfig& cfg) {
  setenv("ZDSC_THREADS", "1", 1);
  const double power = power_from_csnr_db(10.98, 1.0);
  const SourceChannelModel m = benchmark(power);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = da_at_power(m, power, cfg);
  const double secs = seconds_since(t0);
  const AnnealResult& a = res.result;
  const double csnr = csnr_db(a.report.power, 1.0);
  const double snr = snr_db(1.0, a.report.distortion);
  report(3, "annealing at CSNR 10.98 dB", std::abs(csnr - 10.98) <= 0.1 && snr >= 21.5 && secs <= 900.0,
         fmt("CSNR=%.3f dB, SNR=%.3f dB, lambda=%.4e after %zu evaluations, K=%zu, %.0f s", csnr, snr,
             res.lambda, res.evaluations, a.final_k, secs));

  const std::size_t changes = derivative_sign_changes(a.hardened.g_values);
  report(4, "many-to-one encoder structure", changes >= 2,
         fmt("%zu sign changes in the hardened encoder derivative", changes));

  AnnealConfig ac = cfg.anneal;
  ac.grid_counts = cfg.grid_counts;
  const auto& recs = a.trace.records;
  double worst_decay = 0.0;
  for (std::size_t s = 1; s < recs.size(); ++s) {
    worst_decay = std::max(worst_decay, std::abs(recs[s].temperature / recs[s - 1].temperature - ac.alpha));
  }
  std::size_t f_violations = 0;
  for (const TraceRecord& r : recs) {
    for (std::size_t k = 1; k < r.inner_free_energy.size(); ++k) {
      if (r.inner_free_energy[k] > r.inner_free_energy[k - 1]) ++f_violations;
    }
  }
  const double h_end = recs.empty() ? 1.0 : recs.back().report.entropy;
  const bool first_merged = !recs.empty() && recs.front().effective_k == 1 && recs.front().merged_pairs >= 1;
  const AnnealResult again = anneal(ac, res.lambda, m);
  const bool identical = traces_identical(a.trace, again.trace) && a.hardened.g_values == again.hardened.g_values;
  report(7, "annealing invariants",
         recs.size() > 1 && worst_decay < 1e-12 && f_violations == 0 && h_end < ac.h_min && identical &&
             first_merged,
         fmt("%zu steps, max |T'/T - alpha|=%.1e, %zu F increases, final H=%.2e, rerun %s, "
             "first step K=%zu with %zu merged pair(s)",
             recs.size(), worst_decay, f_violations, h_end, identical ? "identical" : "differs",
             recs.empty() ? 0 : recs.front().effective_k, recs.empty() ? 0 : recs.front().merged_pairs));
  unsetenv("ZDSC_THREADS");
}

void method_ordering(const SweepConfig& cfg) {
  const std::vector<double> points{5.0, 8.0, 11.0};
  const auto t0 = std::chrono::steady_clock::now();
  const auto recs = sweep({Method::opta, Method::linear, Method::ncr, Method::da}, points, benchmark(1.0), cfg);
  const double secs = seconds_since(t0);
  std::map<std::pair<Method, double>, double> best;
  std::size_t failed = 0;
  std::size_t off_target = 0;
  for (const SweepRecord& r : recs) {
    if (!r.point) {
      ++failed;
      std::printf("  %s at %.0f dB seed %llu failed: %s\n", to_string(r.method).c_str(), r.target_csnr_db,
                  static_cast<unsigned long long>(r.seed.value_or(0)), r.error.c_str());
      continue;
    }
    // A search that cannot meet the target returns its feasible (lower-power) side.
    if (std::abs(r.point->csnr_db - r.target_csnr_db) > 0.1) ++off_target;
    const auto key = std::make_pair(r.method, r.target_csnr_db);
    const auto it = best.find(key);
    if (it == best.end() || r.point->snr_db > it->second) best[key] = r.point->snr_db;
  }
  bool ordered = failed == 0;
  std::string detail;
  for (double c : points) {
    auto get = [&](Method m) {
      const auto it = best.find({m, c});
      return it == best.end() ? -1e9 : it->second;
    };
    const double o = get(Method::opta), d = get(Method::da), n = get(Method::ncr), l = get(Method::linear);
    ordered = ordered && o >= d && d >= n && n >= l;
    detail += fmt("%.0f dB: OPTA %.2f, DA %.2f, NCR %.2f, linear %.2f; ", c, o, d, n, l);
  }
  const auto lin11 = best.find({Method::linear, 11.0});
  const auto da11 = best.find({Method::da, 11.0});
  const double margin = (lin11 == best.end() || da11 == best.end()) ? -1e9 : da11->second - lin11->second;
  detail += fmt("DA-linear at 11 dB %.2f dB, %zu of %zu points below target power, %.0f s", margin,
                off_target, recs.size(), secs);
  report(5, "method ordering", ordered && margin >= 3.0 && secs <= 7200.0, detail);
}

void property_suites() {
  const std::vector<std::string> cases{
      "gibbs probabilities: properties",
      "zero temperature gives the hard argmin",
      "entropy stays between 0 and ln K",
      "functional gradient: closed-form cases",
      "functional gradient matches finite differences",
      "affine parameter gradient matches finite differences",
      "bayes decoder does not increase J against perturbed tables",
      "monte carlo agrees with quadrature"};
  std::string filter;
  for (const std::string& c : cases) filter += (filter.empty() ? "" : ",") + c;
  const std::string log = std::string(ZDSC_UNIT_TESTS_PATH) + ".properties.log";
  const std::string cmd =
      std::string(ZDSC_UNIT_TESTS_PATH) + " --test-case=\"" + filter + "\" > \"" + log + "\" 2>&1";
  const auto t0 = std::chrono::steady_clock::now();
  const int status = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  std::ifstream in(log);
  const std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t line = out.find("test cases:");
  const std::string summary = line == std::string::npos ? "" : out.substr(line, out.find('\n', line) - line);
  const bool all_ran = summary.find(fmt(" %zu passed | 0 failed", cases.size())) != std::string::npos;
  report(6, "property suites", status == 0 && all_ran && secs < 300.0,
         fmt("%zu suites %s in %.1f s", cases.size(), status == 0 && all_ran ? "passed" : "did not all pass",
             secs));
}

}  // namespace

int main() {
  const SweepConfig cfg;
  opta_reproduction();
  linear_baseline_oracle();
  property_suites();
  annealing(cfg);
  method_ordering(cfg);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

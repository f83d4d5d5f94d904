#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "zdsc/cli_io.hpp"
#include "zdsc/errors.hpp"

namespace zdsc {

namespace fs = std::filesystem;
using nlohmann::json;

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json report_json(const CostReport& r) {
  return {{"distortion", r.distortion}, {"power", r.power},
          {"lagrangian", r.lagrangian}, {"entropy", r.entropy},
          {"free_energy", r.free_energy}, {"lambda", r.lambda},
          {"temperature", r.temperature}};
}

json point_json(const CurvePoint& p) {
  return {{"method", p.method}, {"csnr_db", p.csnr_db}, {"snr_db", p.snr_db},
          {"lambda", p.lambda}, {"effective_k", p.effective_k}};
}

std::string encoder_csv(const TabulatedEncoder& hard, const TabulatedEncoder& avg,
                        const StructuredEncoder* structured) {
  std::ostringstream out;
  out << "x,g_hard,g_avg";
  const std::size_t k = structured ? structured->size() : 0;
  for (std::size_t m = 1; m <= k; ++m) out << ",p_" << m << ",a_" << m << ",b_" << m;
  out << "\n";
  for (std::size_t i = 0; i < hard.x_grid.n(); ++i) {
    out << num(hard.x_grid[i]) << ',' << num(hard.g_values[i]) << ',' << num(avg.g_values[i]);
    for (std::size_t m = 0; m < k; ++m) {
      out << ',' << num(structured->assoc(m, i)) << ',' << num(structured->models[m].a) << ','
          << num(structured->models[m].b);
    }
    out << "\n";
  }
  return out.str();
}

std::string decoder_csv(const DecoderTable& dec) {
  std::ostringstream out;
  out << "y,z,xhat\n";
  for (std::size_t j = 0; j < dec.y_grid.n(); ++j) {
    for (std::size_t m = 0; m < dec.z_grid.n(); ++m) {
      out << num(dec.y_grid[j]) << ',' << num(dec.z_grid[m]) << ',' << num(dec.xhat(j, m))
          << "\n";
    }
  }
  return out.str();
}

std::string trace_csv(const OptimizationTrace& trace) {
  std::ostringstream out;
  out << "step,temperature,effective_k,merged_pairs,inner_iterations,distortion,power,"
         "lagrangian,entropy,free_energy\n";
  for (const TraceRecord& r : trace.records) {
    out << r.outer_step << ',' << num(r.temperature) << ',' << r.effective_k << ','
        << r.merged_pairs << ',' << r.inner_iterations << ',' << num(r.report.distortion) << ','
        << num(r.report.power) << ',' << num(r.report.lagrangian) << ','
        << num(r.report.entropy) << ',' << num(r.report.free_energy) << "\n";
  }
  return out.str();
}

std::string greedy_trace_csv(const std::vector<double>& j_trace) {
  std::ostringstream out;
  out << "iteration,lagrangian\n";
  for (std::size_t i = 0; i < j_trace.size(); ++i) out << i << ',' << num(j_trace[i]) << "\n";
  return out.str();
}

std::string curve_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream out;
  out << "method,target_csnr_db,seed,csnr_db,snr_db,lambda,effective_k,error\n";
  for (const SweepRecord& r : records) {
    out << to_string(r.method) << ',' << num(r.target_csnr_db) << ','
        << (r.seed ? std::to_string(*r.seed) : "") << ',';
    if (r.point) {
      out << num(r.point->csnr_db) << ',' << num(r.point->snr_db) << ','
          << num(r.point->lambda) << ',' << r.point->effective_k << ',';
    } else {
      out << ",,,,";
    }
    std::string err = r.error;
    for (char& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << err << "\n";
  }
  return out.str();
}

class Writer {
 public:
  Writer(fs::path dir, RunResult& result) : dir_(std::move(dir)), result_(result) {}
  void operator()(const std::string& name, const std::string& content) {
    write_atomic(dir_ / name, content);
    result_.files.push_back(name);
  }

 private:
  fs::path dir_;
  RunResult& result_;
};

CurvePoint make_point(Method m, const SourceChannelModel& model, const CostReport& r,
                      std::size_t k) {
  CurvePoint p;
  p.method = to_string(m);
  p.csnr_db = csnr_db(r.power, model.sigma_n2);
  p.snr_db = snr_db(model.sigma_x2, r.distortion);
  p.lambda = r.lambda;
  p.effective_k = k;
  return p;
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  RunResult result;
  result.method = to_string(cfg.method);
  result.config_echo = serialize(cfg);
  Writer write(dir, result);
  const SourceChannelModel& model = cfg.model;
  const SweepConfig sc = sweep_config(cfg);
  const double power = model.power_limit;

  switch (cfg.method) {
    case Method::opta: {
      const double d = opta(model, power);
      const double r = 1.0 - model.rho * model.rho;
      const double q = 1.0 + power / model.sigma_n2;
      const double lambda = r * model.sigma_x2 / (model.sigma_n2 * q * q);
      result.report = CostReport::make(d, power, 0.0, lambda, 0.0);
      result.point = make_point(cfg.method, model, result.report, 1);
      break;
    }
    case Method::linear: {
      const LinearBaseline lin = linear_baseline(model, power, cfg.grid_counts);
      const double gain = std::sqrt(power / model.sigma_x2);
      const GridSet grids =
          default_grids(model, gain * kTailSigmas * model.sigma_x(), cfg.grid_counts);
      const CostEngine engine(model, grids);
      result.report =
          engine.evaluate_costs(lin.encoder, lin.decoder, linear_stationary_lambda(model, power));
      result.point = make_point(cfg.method, model, result.report, 1);
      write("encoder.csv", encoder_csv(lin.encoder, lin.encoder, nullptr));
      write("decoder.csv", decoder_csv(lin.decoder));
      write("trace.csv", trace_csv({}));
      break;
    }
    case Method::greedy: {
      const auto res = greedy_at_power(model, power, cfg.seed, sc);
      result.report = res.result.report;
      result.lambda_evaluations = res.evaluations;
      result.lambda_converged = res.converged;
      result.point = make_point(cfg.method, model, result.report, 1);
      write("encoder.csv", encoder_csv(res.result.encoder, res.result.encoder, nullptr));
      write("decoder.csv", decoder_csv(res.result.decoder));
      write("trace.csv", greedy_trace_csv(res.result.j_trace));
      break;
    }
    case Method::ncr: {
      const auto res = ncr_at_power(model, power, cfg.seed, sc);
      result.report = res.result.report;
      result.lambda_evaluations = res.evaluations;
      result.lambda_converged = res.converged;
      result.point = make_point(cfg.method, model, result.report, 1);
      write("encoder.csv", encoder_csv(res.result.encoder, res.result.encoder, nullptr));
      write("decoder.csv", decoder_csv(res.result.decoder));
      write("trace.csv", trace_csv(res.result.trace));
      break;
    }
    case Method::da: {
      const auto res = da_at_power(model, power, sc);
      const AnnealResult& a = res.result;
      result.report = a.report;
      result.lambda_evaluations = res.evaluations;
      result.lambda_converged = res.converged;
      result.point = make_point(cfg.method, model, result.report, a.final_k);
      write("encoder.csv", encoder_csv(a.hardened, averaged_encoder(a.structured), &a.structured));
      write("decoder.csv", decoder_csv(a.decoder));
      write("trace.csv", trace_csv(a.trace));
      break;
    }
    case Method::sweep: {
      result.sweep = sweep(cfg.sweep_methods, cfg.sweep_csnr_db, model, sc);
      write("curve.csv", curve_csv(result.sweep));
      break;
    }
  }

  if (cfg.plots && cfg.method != Method::opta) {
    for (const fs::path& p : emit_plots(dir)) result.files.push_back(p.filename().string());
  }
  result.files.push_back("result.json");
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json j;
  j["method"] = result.method;
  j["config"] = json::parse(result.config_echo);
  j["report"] = report_json(result.report);
  if (result.point) {
    j["curve_point"] = point_json(*result.point);
    j["snr_db"] = result.point->snr_db;
    j["csnr_db"] = result.point->csnr_db;
    j["lambda"] = result.point->lambda;
    j["effective_k"] = result.point->effective_k;
  }
  if (cfg.method == Method::sweep) {
    json records = json::array();
    for (const SweepRecord& r : result.sweep) {
      json e = {{"method", to_string(r.method)}, {"target_csnr_db", r.target_csnr_db}};
      e["seed"] = r.seed ? json(*r.seed) : json(nullptr);
      e["point"] = r.point ? point_json(*r.point) : json(nullptr);
      if (!r.error.empty()) e["error"] = r.error;
      records.push_back(e);
    }
    j["sweep"] = records;
  }
  j["lambda_evaluations"] = result.lambda_evaluations;
  j["lambda_converged"] = result.lambda_converged;
  j["files"] = result.files;
  j["wall_time_s"] = result.wall_time_s;
  write_atomic(dir / "result.json", j.dump(2) + "\n");
  return result;
}

}  // namespace zdsc

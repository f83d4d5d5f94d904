#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <set>
#include <string>

#include <json.hpp>

#include "zdsc/cli_io.hpp"
#include "zdsc/errors.hpp"

namespace zdsc {

namespace {

constexpr double kMaxConfigRho = 0.999;

using nlohmann::json;

// Reads one JSON object, remembering which keys were consumed so that any
// leftover key can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void get(const std::string& key, double& out) {
    if (has(key)) out = number(key);
  }
  template <std::unsigned_integral T>
  void get(const std::string& key, T& out) {
    if (has(key)) out = static_cast<T>(unsigned_int(key));
  }
  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_boolean()) throw ParseError(key_path(key), "expected true or false");
    out = v.get<bool>();
  }
  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_string()) throw ParseError(key_path(key), "expected a string");
    out = v.get<std::string>();
  }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw ParseError(key_path(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(key_path(key), "expected a finite number");
    return d;
  }

  std::uint64_t unsigned_int(const std::string& key) {
    const json& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ParseError(key_path(key), "expected a non-negative integer");
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ParseError(key_path(item.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Method parse_method(const json& v, const std::string& key) {
  if (!v.is_string()) throw ParseError(key, "expected a method name");
  try {
    return method_from_string(v.get<std::string>());
  } catch (const InvalidParameter&) {
    throw ParseError(key, "unknown method '" + v.get<std::string>() + "'");
  }
}

std::vector<double> number_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ParseError(key, "expected an array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number() || !std::isfinite(e.get<double>())) {
      throw ParseError(key, "expected an array of numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::uint64_t> seed_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ParseError(key, "expected an array of seeds");
  std::vector<std::uint64_t> out;
  for (const json& e : v) {
    if (!e.is_number_unsigned()) throw ParseError(key, "expected non-negative integer seeds");
    out.push_back(e.get<std::uint64_t>());
  }
  return out;
}

template <class F>
void check(const std::string& key, F&& validate) {
  try {
    validate();
  } catch (const InvalidParameter& e) {
    throw ParseError(key, e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("<document>", e.what());
  }
  RunConfig cfg;
  Section root(doc, "");

  if (!root.has("method")) throw ParseError("method", "missing required key");
  cfg.method = parse_method(root.at("method"), "method");
  if (!root.has("rho")) throw ParseError("rho", "missing required key");
  cfg.model.rho = root.number("rho");
  root.get("sigma_x2", cfg.model.sigma_x2);
  root.get("sigma_z2", cfg.model.sigma_z2);
  root.get("sigma_n2", cfg.model.sigma_n2);

  if (root.has("power")) cfg.power = root.number("power");
  if (root.has("csnr_db")) cfg.csnr_db = root.number("csnr_db");
  if (cfg.power && cfg.csnr_db) {
    throw ParseError("csnr_db", "give either power or csnr_db, not both");
  }
  if (root.has("lambda")) cfg.lambda = root.number("lambda");
  if (root.has("lambda_bracket")) {
    const auto b = number_list(root.at("lambda_bracket"), "lambda_bracket");
    if (b.size() != 2 || !(b[0] > 0.0) || !(b[1] > b[0])) {
      throw ParseError("lambda_bracket", "expected [lo, hi] with 0 < lo < hi");
    }
    cfg.lambda_bracket = std::make_pair(b[0], b[1]);
  }
  root.get("seed", cfg.seed);
  if (root.has("seeds")) cfg.seeds = seed_list(root.at("seeds"), "seeds");
  root.get("threads", cfg.threads);
  root.get("output_dir", cfg.output_dir);
  root.get("plots", cfg.plots);

  if (root.has("grid")) {
    Section s(root.at("grid"), "grid");
    s.get("nx", cfg.grid_counts.nx);
    s.get("nz", cfg.grid_counts.nz);
    s.get("ny", cfg.grid_counts.ny);
    s.get("nn", cfg.grid_counts.nn);
    s.finish();
  }
  if (root.has("anneal")) {
    Section s(root.at("anneal"), "anneal");
    AnnealConfig& a = cfg.anneal;
    s.get("t_init_factor", a.t_init_factor);
    s.get("alpha", a.alpha);
    s.get("h_min", a.h_min);
    s.get("k_max", a.k_max);
    s.get("perturb_scale", a.perturb_scale);
    s.get("split_tol", a.split_tol);
    s.get("inner_tol", a.inner_tol);
    s.get("max_inner_iters", a.max_inner_iters);
    s.get("rng_seed", a.rng_seed);
    s.get("t_floor_factor", a.t_floor_factor);
    s.get("init_fit_iters", a.init_fit_iters);
    s.get("polish_iters", a.polish_iters);
    s.finish();
  }
  if (root.has("greedy")) {
    Section s(root.at("greedy"), "greedy");
    GreedyConfig& g = cfg.greedy;
    s.get("step_size", g.step_size);
    s.get("max_iters", g.max_iters);
    s.get("conv_tol", g.conv_tol);
    s.get("backtrack_factor", g.backtrack_factor);
    s.finish();
  }
  if (root.has("ncr")) {
    Section s(root.at("ncr"), "ncr");
    s.get("ratio", cfg.ncr_ratio);
    s.get("stages", cfg.ncr_stages);
    s.finish();
  }
  if (root.has("search")) {
    Section s(root.at("search"), "search");
    s.get("rel_tol", cfg.search.rel_tol);
    s.get("max_iters", cfg.search.max_iters);
    s.get("bracket_factor", cfg.bracket_factor);
    s.get("max_bracket_steps", cfg.max_bracket_steps);
    s.finish();
  }
  if (root.has("sweep")) {
    Section s(root.at("sweep"), "sweep");
    if (s.has("methods")) {
      const json& v = s.at("methods");
      if (!v.is_array()) throw ParseError("sweep.methods", "expected an array of method names");
      cfg.sweep_methods.clear();
      for (const json& e : v) cfg.sweep_methods.push_back(parse_method(e, "sweep.methods"));
    }
    if (s.has("csnr_db")) cfg.sweep_csnr_db = number_list(s.at("csnr_db"), "sweep.csnr_db");
    s.finish();
  }
  root.finish();

  // Cross-field validation.
  if (cfg.method == Method::sweep) {
    if (cfg.power || cfg.csnr_db) {
      throw ParseError(cfg.power ? "power" : "csnr_db",
                       "a sweep takes its operating points from sweep.csnr_db");
    }
    if (cfg.sweep_methods.empty()) throw ParseError("sweep.methods", "no methods given");
    if (cfg.sweep_csnr_db.empty()) throw ParseError("sweep.csnr_db", "no CSNR points given");
    for (Method m : cfg.sweep_methods) {
      if (m == Method::sweep) throw ParseError("sweep.methods", "a sweep cannot nest a sweep");
    }
    cfg.model.power_limit = 1.0;
  } else {
    if (!cfg.power && !cfg.csnr_db) throw ParseError("csnr_db", "missing power or csnr_db");
    check("sigma_n2", [&] {
      cfg.model.power_limit =
          cfg.power ? *cfg.power : power_from_csnr_db(*cfg.csnr_db, cfg.model.sigma_n2);
    });
  }
  const bool uses_seeds = cfg.method == Method::sweep &&
                          std::any_of(cfg.sweep_methods.begin(), cfg.sweep_methods.end(),
                                      [](Method m) {
                                        return m == Method::ncr || m == Method::greedy;
                                      });
  if (uses_seeds && cfg.seeds.empty()) throw ParseError("seeds", "no restart seeds given");
  if (cfg.lambda && !(*cfg.lambda >= 0.0)) throw ParseError("lambda", "must be non-negative");
  if (cfg.lambda && cfg.lambda_bracket) {
    throw ParseError("lambda_bracket", "give either lambda or lambda_bracket, not both");
  }
  if (cfg.power && !(*cfg.power > 0.0)) throw ParseError("power", "must be positive");
  check("rho", [&] { cfg.model.validate(); });
  if (std::abs(cfg.model.rho) > kMaxConfigRho) {
    throw ParseError("rho", "|rho| above 0.999 makes Z|X numerically degenerate");
  }
  if (cfg.grid_counts.nx < 2 || cfg.grid_counts.nz < 2 || cfg.grid_counts.ny < 2 ||
      cfg.grid_counts.nn < 2) {
    throw ParseError("grid", "every grid needs at least 2 points");
  }
  cfg.anneal.grid_counts = cfg.grid_counts;
  check("anneal", [&] { cfg.anneal.validate(); });
  check("greedy", [&] { cfg.greedy.validate(); });
  if (!(cfg.ncr_ratio > 1.0)) throw ParseError("ncr.ratio", "must exceed 1");
  if (cfg.ncr_stages < 1) throw ParseError("ncr.stages", "must be at least 1");
  if (!(cfg.search.rel_tol > 0.0)) throw ParseError("search.rel_tol", "must be positive");
  if (!(cfg.bracket_factor > 1.0)) throw ParseError("search.bracket_factor", "must exceed 1");
  if (cfg.output_dir.empty()) throw ParseError("output_dir", "must not be empty");
  return cfg;
}

std::string serialize(const RunConfig& cfg) {
  json j;
  j["method"] = to_string(cfg.method);
  j["rho"] = cfg.model.rho;
  j["sigma_x2"] = cfg.model.sigma_x2;
  j["sigma_z2"] = cfg.model.sigma_z2;
  j["sigma_n2"] = cfg.model.sigma_n2;
  if (cfg.power) j["power"] = *cfg.power;
  if (cfg.csnr_db) j["csnr_db"] = *cfg.csnr_db;
  if (cfg.lambda) j["lambda"] = *cfg.lambda;
  if (cfg.lambda_bracket) {
    j["lambda_bracket"] = {cfg.lambda_bracket->first, cfg.lambda_bracket->second};
  }
  j["seed"] = cfg.seed;
  j["seeds"] = cfg.seeds;
  j["threads"] = cfg.threads;
  j["output_dir"] = cfg.output_dir;
  j["plots"] = cfg.plots;
  j["grid"] = {{"nx", cfg.grid_counts.nx},
               {"nz", cfg.grid_counts.nz},
               {"ny", cfg.grid_counts.ny},
               {"nn", cfg.grid_counts.nn}};
  const AnnealConfig& a = cfg.anneal;
  j["anneal"] = {{"t_init_factor", a.t_init_factor},
                 {"alpha", a.alpha},
                 {"h_min", a.h_min},
                 {"k_max", a.k_max},
                 {"perturb_scale", a.perturb_scale},
                 {"split_tol", a.split_tol},
                 {"inner_tol", a.inner_tol},
                 {"max_inner_iters", a.max_inner_iters},
                 {"rng_seed", a.rng_seed},
                 {"t_floor_factor", a.t_floor_factor},
                 {"init_fit_iters", a.init_fit_iters},
                 {"polish_iters", a.polish_iters}};
  const GreedyConfig& g = cfg.greedy;
  j["greedy"] = {{"step_size", g.step_size},
                 {"max_iters", g.max_iters},
                 {"conv_tol", g.conv_tol},
                 {"backtrack_factor", g.backtrack_factor}};
  j["ncr"] = {{"ratio", cfg.ncr_ratio}, {"stages", cfg.ncr_stages}};
  j["search"] = {{"rel_tol", cfg.search.rel_tol},
                 {"max_iters", cfg.search.max_iters},
                 {"bracket_factor", cfg.bracket_factor},
                 {"max_bracket_steps", cfg.max_bracket_steps}};
  json methods = json::array();
  for (Method m : cfg.sweep_methods) methods.push_back(to_string(m));
  j["sweep"] = {{"methods", methods}, {"csnr_db", cfg.sweep_csnr_db}};
  return j.dump(2) + "\n";
}

SweepConfig sweep_config(const RunConfig& cfg) {
  SweepConfig s;
  s.anneal = cfg.anneal;
  s.greedy = cfg.greedy;
  s.seeds = cfg.seeds;
  s.ncr_ratio = cfg.ncr_ratio;
  s.ncr_stages = cfg.ncr_stages;
  s.grid_counts = cfg.grid_counts;
  s.search = cfg.search;
  s.bracket_factor = cfg.bracket_factor;
  s.max_bracket_steps = cfg.max_bracket_steps;
  s.lambda = cfg.lambda;
  s.lambda_bracket = cfg.lambda_bracket;
  s.threads = cfg.threads;
  return s;
}

}  // namespace zdsc

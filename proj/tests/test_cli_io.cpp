#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "zdsc/cli_io.hpp"
#include "zdsc/errors.hpp"

using namespace zdsc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("zdsc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string parse_error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ParseError& e) {
    return e.key();
  }
  return "<no error>";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ZDSC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

RunConfig quick(Method m, const fs::path& dir) {
  RunConfig c = parse_config(R"({"method":"linear","rho":0.99,"csnr_db":10.98})");
  c.method = m;
  c.output_dir = dir.string();
  return c;
}

}  // namespace

TEST_CASE("minimal config gets defaults") {
  const RunConfig c = parse_config(R"({"method":"da","rho":0.99,"csnr_db":10.98})");
  CHECK(c.method == Method::da);
  CHECK(c.anneal.alpha == 0.95);
  CHECK(c.anneal.h_min == 1e-4);
  CHECK(c.anneal.t_init_factor == 2.0);
  CHECK(c.anneal.split_tol == 1e-3);
  CHECK(c.anneal.inner_tol == 1e-6);
  CHECK(c.grid_counts == GridCounts{});
  CHECK(c.model.power_limit == doctest::Approx(12.531).epsilon(1e-4));
  CHECK(c.model.sigma_x2 == 1.0);
  CHECK(!c.lambda);
}

TEST_CASE("config errors name the key") {
  CHECK(parse_error_key(R"({"method":"da","rho":0.99,"csnr_db":10,"power":3})") == "csnr_db");
  CHECK(parse_error_key(R"({"method":"da","rho":0.99,"csnr_db":10,"foo":1})") == "foo");
  CHECK(parse_error_key(R"({"method":"da","rho":0.99,"csnr_db":10,"anneal":{"bar":1}})") ==
        "anneal.bar");
  CHECK(parse_error_key(R"({"rho":0.99,"csnr_db":10})") == "method");
  CHECK(parse_error_key(R"({"method":"da","csnr_db":10})") == "rho");
  CHECK(parse_error_key(R"({"method":"da","rho":0.99})") == "csnr_db");
  CHECK(parse_error_key(R"({"method":"da","rho":"high","csnr_db":10})") == "rho");
  CHECK(parse_error_key(R"({"method":"anneal","rho":0.9,"csnr_db":10})") == "method");
  CHECK(parse_error_key(R"({"method":"da","rho":1.0,"csnr_db":10})") == "rho");
  CHECK(parse_error_key(R"({"method":"da","rho":0.9,"csnr_db":10,"anneal":{"alpha":1.5}})") ==
        "anneal");
  CHECK(parse_error_key(R"({"method":"da","rho":0.9,"power":-2})") == "power");
  CHECK(parse_error_key(R"({"method":"sweep","rho":0.9,"csnr_db":10})") == "csnr_db");
  CHECK(parse_error_key(R"({"method":"da","rho":0.9,"csnr_db":10,"grid":{"nx":"many"}})") ==
        "grid.nx");
  CHECK(parse_error_key("{not json") == "<document>");
}

TEST_CASE("config round trip") {
  RunConfig c = parse_config(R"({
    "method": "sweep", "rho": -0.8, "sigma_x2": 2.0, "sigma_z2": 0.5, "sigma_n2": 1.5,
    "lambda_bracket": [1e-4, 1e-2], "seed": 9, "seeds": [3, 4], "threads": 2,
    "output_dir": "somewhere", "plots": false,
    "grid": {"nx": 101, "nz": 33, "ny": 65, "nn": 25},
    "anneal": {"alpha": 0.9, "k_max": 8, "rng_seed": 5, "perturb_scale": 0.5},
    "greedy": {"step_size": 10.0, "max_iters": 100},
    "ncr": {"ratio": 50.0, "stages": 4},
    "search": {"rel_tol": 0.01, "max_iters": 7, "bracket_factor": 3.0},
    "sweep": {"methods": ["opta", "greedy"], "csnr_db": [1.0, 2.5]}
  })");
  CHECK(parse_config(serialize(c)) == c);
  CHECK(serialize(parse_config(serialize(c))) == serialize(c));

  const RunConfig d = parse_config(R"({"method":"greedy","rho":0.5,"power":3.0,"lambda":0.01})");
  CHECK(parse_config(serialize(d)) == d);
  const RunConfig e = parse_config(R"({"method":"da","rho":0.5,"csnr_db":7.5})");
  CHECK(parse_config(serialize(e)) == e);
}

TEST_CASE("opta and linear runs write the expected results") {
  const fs::path dir = scratch_dir("opta");
  const RunResult o = run(quick(Method::opta, dir));
  const json r = json::parse(slurp(dir / "result.json"));
  CHECK(r["snr_db"].get<double>() == doctest::Approx(28.32).epsilon(0.005 / 28.32));
  CHECK(r["method"] == "opta");
  CHECK(o.point->snr_db == doctest::Approx(28.32).epsilon(0.005 / 28.32));
  CHECK(parse_config(r["config"].dump()) == quick(Method::opta, dir));

  const fs::path ldir = scratch_dir("linear");
  run(quick(Method::linear, ldir));
  const json l = json::parse(slurp(ldir / "result.json"));
  CHECK(l["snr_db"].get<double>() == doctest::Approx(17.98).epsilon(0.05 / 17.98));

  const auto enc = lines(ldir / "encoder.csv");
  CHECK(enc.front() == "x,g_hard,g_avg");
  CHECK(enc.size() == 1 + 201);
  const auto dec = lines(ldir / "decoder.csv");
  CHECK(dec.front() == "y,z,xhat");
  CHECK(dec.size() == 1 + 97 * 65);
  // y-major: the first z-row block shares one y value.
  CHECK(dec[1].substr(0, dec[1].find(',')) == dec[65].substr(0, dec[65].find(',')));
  CHECK(dec[1].substr(0, dec[1].find(',')) != dec[66].substr(0, dec[66].find(',')));
  CHECK(fs::exists(ldir / "trace.csv"));
  CHECK(fs::exists(ldir / "encoder.svg"));
  CHECK(fs::exists(ldir / "decoder.svg"));
}

TEST_CASE("identical configs give identical results") {
  auto strip = [](const fs::path& p) {
    json j = json::parse(slurp(p));
    j.erase("wall_time_s");
    j["config"].erase("output_dir");
    return j.dump();
  };
  RunConfig c = quick(Method::greedy, scratch_dir("det_a"));
  c.grid_counts = GridCounts{81, 33, 49, 25};
  c.lambda = 2e-3;
  c.greedy.max_iters = 50;
  run(c);
  RunConfig c2 = c;
  c2.output_dir = scratch_dir("det_b").string();
  run(c2);
  CHECK(strip(fs::path(c.output_dir) / "result.json") ==
        strip(fs::path(c2.output_dir) / "result.json"));
  CHECK(slurp(fs::path(c.output_dir) / "encoder.csv") ==
        slurp(fs::path(c2.output_dir) / "encoder.csv"));
}

TEST_CASE("structured encoder columns in encoder.csv") {
  RunConfig c = quick(Method::da, scratch_dir("da_small"));
  c.grid_counts = GridCounts{41, 25, 33, 17};
  c.anneal.grid_counts = c.grid_counts;
  c.anneal.alpha = 0.7;
  c.lambda = 3e-4;
  const RunResult r = run(c);
  const auto enc = lines(fs::path(c.output_dir) / "encoder.csv");
  REQUIRE(enc.size() == 1 + 41);
  std::string expect = "x,g_hard,g_avg";
  const std::size_t k = r.point->effective_k;
  for (std::size_t m = 1; m <= k; ++m) {
    expect += ",p_" + std::to_string(m) + ",a_" + std::to_string(m) + ",b_" + std::to_string(m);
  }
  CHECK(enc.front() == expect);
}

TEST_CASE("sweep writes a curve and its plot") {
  RunConfig c = parse_config(R"({"method":"sweep","rho":0.99,
      "sweep":{"methods":["opta","linear"],"csnr_db":[2,6,10]}})");
  c.output_dir = scratch_dir("sweep").string();
  const RunResult r = run(c);
  CHECK(r.sweep.size() == 6);
  const auto curve = lines(fs::path(c.output_dir) / "curve.csv");
  CHECK(curve.front() == "method,target_csnr_db,seed,csnr_db,snr_db,lambda,effective_k,error");
  CHECK(curve.size() == 7);
  CHECK(fs::exists(fs::path(c.output_dir) / "curve.svg"));
  CHECK(json::parse(slurp(fs::path(c.output_dir) / "result.json"))["sweep"].size() == 6);
}

TEST_CASE("emit_plots needs inputs") {
  const fs::path dir = scratch_dir("empty");
  fs::create_directories(dir);
  CHECK_THROWS_AS(emit_plots(dir), Error);
}

TEST_CASE("write_atomic replaces the target") {
  const fs::path dir = scratch_dir("atomic");
  fs::create_directories(dir);
  write_atomic(dir / "f.txt", "one");
  write_atomic(dir / "f.txt", "two");
  CHECK(slurp(dir / "f.txt") == "two");
  CHECK(!fs::exists(dir / "f.txt.tmp"));
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch_dir("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "ok.json") << R"({"method":"opta","rho":0.99,"csnr_db":10.98})";
  std::ofstream(dir / "bad.json") << R"({"method":"opta","rho":0.99,"csnr_db":10.98,"foo":1})";
  std::ofstream(dir / "nobracket.json")
      << R"({"method":"greedy","rho":0.99,"csnr_db":5,"lambda_bracket":[50,100],
            "grid":{"nx":41,"nz":17,"ny":33,"nn":17},"plots":false})";

  CHECK(run_cli("opta --config " + (dir / "ok.json").string() + " --out " + (dir / "a").string()) == 0);
  CHECK(json::parse(slurp(dir / "a" / "result.json"))["snr_db"].get<double>() ==
        doctest::Approx(28.32).epsilon(0.005 / 28.32));

  CHECK(run_cli("linear --config " + (dir / "ok.json").string() + " --out " +
                (dir / "b").string() + " --csnr-db 5 --rho 0.9 --no-plots") == 0);
  const json b = json::parse(slurp(dir / "b" / "result.json"));
  CHECK(b["csnr_db"].get<double>() == doctest::Approx(5.0));
  CHECK(b["config"]["rho"].get<double>() == 0.9);
  CHECK(!fs::exists(dir / "b" / "encoder.svg"));

  CHECK(run_cli("opta --config " + (dir / "bad.json").string() + " --out " + (dir / "c").string()) == 2);
  const json c = json::parse(slurp(dir / "c" / "error.json"));
  CHECK(c["error"]["key"] == "foo");

  CHECK(run_cli("greedy --config " + (dir / "nobracket.json").string() + " --out " +
                (dir / "d").string()) == 3);
  CHECK(json::parse(slurp(dir / "d" / "error.json"))["error"]["kind"] == "bracket");
  CHECK(run_cli("opta --config " + (dir / "missing.json").string() + " --out " +
                (dir / "e").string()) == 2);
}

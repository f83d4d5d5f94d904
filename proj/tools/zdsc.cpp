// Command-line driver: zdsc <method> --config FILE [overrides].

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "zdsc/cli_io.hpp"
#include "zdsc/errors.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

int fail(const std::filesystem::path& dir, int code, const std::string& kind,
         const std::string& message, const std::string& key = "") {
  nlohmann::json err = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  if (!key.empty()) err["error"]["key"] = key;
  std::cerr << "zdsc: " << message << "\n";
  try {
    std::filesystem::create_directories(dir);
    zdsc::write_atomic(dir / "error.json", err.dump(2) + "\n");
  } catch (const std::exception&) {
    // The error record is best effort; the exit code still reports failure.
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-delay source-channel mapping design with decoder side information"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> csnr;
  std::optional<double> rho;
  bool no_plots = false;

  for (const char* name : {"da", "greedy", "ncr", "linear", "opta", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " method");
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "seed (overrides seed and anneal.rng_seed)");
    sub->add_option("--csnr-db", csnr, "channel SNR in dB (replaces power/csnr_db)");
    sub->add_option("--rho", rho, "source/side-information correlation");
    sub->add_flag("--no-plots", no_plots, "skip SVG output");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string method = app.get_subcommands().front()->get_name();

  std::filesystem::path err_dir = out_dir.empty() ? "." : out_dir;
  zdsc::RunConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) throw zdsc::ParseError("--config", "cannot read " + config_path);
    std::stringstream text;
    text << in.rdbuf();
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw zdsc::ParseError("<document>", e.what());
    }
    if (!doc.is_object()) throw zdsc::ParseError("<root>", "expected an object");
    doc["method"] = method;
    if (!out_dir.empty()) doc["output_dir"] = out_dir;
    if (seed) {
      doc["seed"] = *seed;
      if (!doc.contains("anneal")) doc["anneal"] = nlohmann::json::object();
      if (doc["anneal"].is_object()) doc["anneal"]["rng_seed"] = *seed;
    }
    if (csnr) {
      doc.erase("power");
      doc["csnr_db"] = *csnr;
    }
    if (rho) doc["rho"] = *rho;
    if (no_plots) doc["plots"] = false;
    cfg = zdsc::parse_config(doc.dump());
  } catch (const zdsc::ParseError& e) {
    return fail(err_dir, kConfigError, "config", e.what(), e.key());
  }

  err_dir = cfg.output_dir;
  try {
    const zdsc::RunResult r = zdsc::run(cfg);
    if (r.point) {
      std::cout << r.method << ": CSNR " << r.point->csnr_db << " dB, SNR " << r.point->snr_db
                << " dB, lambda " << r.point->lambda << "\n";
    } else {
      std::cout << r.method << ": " << r.sweep.size() << " sweep records\n";
    }
    std::cout << "wrote " << cfg.output_dir << "/result.json\n";
    return 0;
  } catch (const zdsc::InvalidParameter& e) {
    return fail(err_dir, kConfigError, "invalid_parameter", e.what());
  } catch (const zdsc::BracketError& e) {
    return fail(err_dir, kNumericError, "bracket", e.what());
  } catch (const zdsc::Error& e) {
    return fail(err_dir, kNumericError, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(err_dir, kNumericError, "internal", e.what());
  }
}

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "linphot/linphot.hpp"

namespace fs = std::filesystem;
using namespace linphot;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

RunConfig resolved_config(const Globals& g) {
  detail::require(!g.config.empty(), ErrorKind::config, "--config is required");
  RunConfig c = load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.workers) {
    detail::require(*g.workers >= 1, ErrorKind::config, "field 'workers': must be >= 1");
    c.workers = *g.workers;
  }
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

fs::path out_dir(const Globals& g, const fs::path& fallback) { return g.out.empty() ? fallback : fs::path(g.out); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon statistics with linear (non-photon-counting) detectors"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "run configuration (JSON)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--workers", g.workers, "worker threads per ensemble");

  auto* simulate = app.add_subcommand("simulate", "write dark and per-eta voltage ensembles");

  auto* moments = app.add_subcommand("moments", "print sample moments of an ensemble CSV as JSON");
  std::string moments_file;
  int moments_order = 4;
  moments->add_option("ensemble", moments_file, "ensemble CSV")->required();
  moments->add_option("--order", moments_order, "highest moment order (2..5)");

  auto* calibrate = app.add_subcommand("calibrate", "fit the Fano-factor line and write calibration.json");
  std::string cal_ensembles, cal_dark, cal_points;
  calibrate->add_option("--ensembles", cal_ensembles, "directory of per-eta ensemble CSVs (blind mode)");
  calibrate->add_option("--dark", cal_dark, "dark ensemble CSV (blind mode; default DIR/dark.csv)");
  calibrate->add_option("--points", cal_points, "precomputed sweep points CSV");

  auto* reconstruct = app.add_subcommand("reconstruct", "rebin an ensemble into a detected-photon histogram");
  std::string rec_ensemble, rec_calibration, rec_dark;
  std::optional<double> rec_gamma_bar, rec_dark_mean;
  reconstruct->add_option("--ensemble", rec_ensemble, "ensemble CSV")->required();
  auto* gb = reconstruct->add_option("--gamma-bar", rec_gamma_bar, "mean gain");
  auto* fc = reconstruct->add_option("--from-calibration", rec_calibration, "take gamma_bar from calibration.json");
  gb->excludes(fc);
  auto* dk = reconstruct->add_option("--dark", rec_dark, "dark ensemble CSV used to zero the baseline");
  auto* dm = reconstruct->add_option("--dark-mean", rec_dark_mean, "baseline to subtract");
  dk->excludes(dm);

  auto* check = app.add_subcommand("check", "re-verify every invariant of an output directory");
  std::string check_dir;
  check->add_option("dir", check_dir, "output directory (default --out)");

  auto* run = app.add_subcommand("run", "simulate, calibrate and reconstruct in one pass");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto c = resolved_config(g);
      write_simulation(c, simulate_data(c), c.output_dir);
      std::cout << "wrote " << c.eta_series.size() << " eta ensembles and dark.csv to " << c.output_dir << "\n";
      return 0;
    }
    if (*moments) {
      detail::require(fs::exists(moments_file), ErrorKind::io, "input not found: " + moments_file);
      const auto ens = io::read_ensemble(moments_file).ensemble;
      std::cout << moments_json(ens, moments_order).dump(2) << "\n";
      return 0;
    }
    if (*calibrate) {
      CalibrationOutcome outcome;
      std::string mode;
      std::optional<std::string> hash;
      std::optional<RunConfig> truth;
      fs::path dest;
      if (!cal_points.empty()) {
        detail::require(fs::exists(cal_points), ErrorKind::io, "input not found: " + cal_points);
        outcome.fit = fit_fano_line(io::points_from_csv(io::read_file(cal_points), cal_points));
        mode = "points";
        dest = out_dir(g, ".");
      } else if (!cal_ensembles.empty()) {
        const fs::path dir = cal_ensembles;
        const fs::path dark = cal_dark.empty() ? dir / "dark.csv" : fs::path(cal_dark);
        const auto in = load_blind_inputs(dir, dark);
        outcome.fit = fit_fano_line(points_blind_mode(in.dark, in.series));
        mode = "blind";
        dest = out_dir(g, ".");
      } else {
        const auto c = resolved_config(g);
        outcome = calibrate_simulation(c);
        mode = "simulation";
        hash = config_hash(c);
        truth = c;
        dest = c.output_dir;
      }
      const Json doc = calibration_document(outcome, mode, hash, truth);
      io::write_file(dest / "calibration.json", dump(doc));
      std::cout << doc["fit"].dump(2) << "\n";
      return 0;
    }
    if (*reconstruct) {
      detail::require(fs::exists(rec_ensemble), ErrorKind::io, "input not found: " + rec_ensemble);
      const auto file = io::read_ensemble(rec_ensemble);
      double gamma_bar = 0.0;
      if (rec_gamma_bar) {
        gamma_bar = *rec_gamma_bar;
      } else {
        detail::require(!rec_calibration.empty(), ErrorKind::config, "one of --gamma-bar or --from-calibration is required");
        detail::require(fs::exists(rec_calibration), ErrorKind::io, "input not found: " + rec_calibration);
        const auto fit = fit_from_json(Json::parse(io::read_file(rec_calibration)));
        detail::require(fit.valid, ErrorKind::invalid_parameter, "calibration in " + rec_calibration + " is not valid");
        gamma_bar = fit.gamma_bar_est;
      }
      double dark_mean = 0.0;
      if (rec_dark_mean) {
        dark_mean = *rec_dark_mean;
      } else if (!rec_dark.empty()) {
        detail::require(fs::exists(rec_dark), ErrorKind::io, "input not found: " + rec_dark);
        dark_mean = estimate_dark_offset(io::read_ensemble(rec_dark).ensemble);
      }
      std::optional<DetectedPhotonDistribution> reference;
      if (!g.config.empty()) {
        const auto c = resolved_config(g);
        reference = apply_bernoulli(build_source(c), file.ensemble.eta);
      }
      const auto outcome = reconstruct_ensemble(file.ensemble, dark_mean, gamma_bar, reference);
      write_reconstruction(outcome, out_dir(g, "."), file.config_hash);
      std::cout << reconstruction_metrics_json(outcome.result, outcome.consistency, outcome.comparison).dump(2) << "\n";
      return 0;
    }
    if (*check) {
      const fs::path dir = check_dir.empty() ? out_dir(g, ".") : fs::path(check_dir);
      detail::require(fs::exists(dir / "config.json"), ErrorKind::io, "input not found: " + (dir / "config.json").string());
      return check_output(dir, std::cout) ? 0 : 1;
    }
    if (*run) {
      const auto c = resolved_config(g);
      const auto r = run_experiment(c, c.output_dir);
      std::cout << "report: " << (fs::path(c.output_dir) / "report.md").string() << "\n";
      std::cout << "overall: " << (r.pass ? "PASS" : "FAIL") << "\n";
      return r.pass ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

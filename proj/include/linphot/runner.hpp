#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "linphot/calibration.hpp"
#include "linphot/detector_model.hpp"
#include "linphot/ensemble_io.hpp"
#include "linphot/json_io.hpp"
#include "linphot/loss_channel.hpp"
#include "linphot/reconstruction.hpp"
#include "linphot/run_config.hpp"
#include "linphot/stat_engine.hpp"

namespace linphot {

namespace fs = std::filesystem;

/// Stream id of the zero-light recording; eta point i uses stream id i.
inline constexpr std::uint64_t kDarkStream = 0xDA4C000000000001ULL;

inline std::string eta_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "eta_%02zu.csv", i);
  return buf;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

struct SimulatedData {
  VoltageEnsemble dark;
  std::vector<VoltageEnsemble> series;
};

inline SimulatedData simulate_data(const RunConfig& c) {
  const auto source = build_source(c);
  const auto gain = build_gain(c);
  const auto dark = build_dark(c);
  SimulatedData d;
  d.dark = simulate_dark(dark, c.dark_samples, derive_seed(c.seed, kDarkStream), {c.workers, 1.0, false});
  for (std::size_t i = 0; i < c.eta_series.size(); ++i) {
    d.series.push_back(simulate_ensemble(source, c.eta_series[i], gain, dark, c.n_samples, derive_seed(c.seed, i),
                                         {c.workers, 1.0, true}));
  }
  return d;
}

inline Json config_document(const RunConfig& c) {
  Json j = config_to_json(c);
  j["config_hash"] = config_hash(c);
  return j;
}

/// Writes config.json and ensembles/{dark,eta_XX}.csv under `out`.
inline void write_simulation(const RunConfig& c, const SimulatedData& d, const fs::path& out) {
  const std::string hash = config_hash(c);
  io::write_file(out / "config.json", dump(config_document(c)));
  io::write_file(out / "ensembles" / "dark.csv", io::ensemble_to_csv(d.dark, hash));
  for (std::size_t i = 0; i < d.series.size(); ++i) {
    io::write_file(out / "ensembles" / eta_file_name(i), io::ensemble_to_csv(d.series[i], hash));
  }
}

/// Simulation mode: known baseline and known dark variance.
inline std::vector<EtaSeriesPoint> points_simulation_mode(const RunConfig& c,
                                                          const std::vector<VoltageEnsemble>& series) {
  std::vector<EtaSeriesPoint> pts;
  for (const auto& e : series) {
    const double g = e.gain_scale;
    pts.push_back(measure_point(subtract_offset(e, g * c.dark.offset), g * g * c.dark.sigma0 * c.dark.sigma0));
  }
  return pts;
}

/// Blind mode: baseline and dark variance are taken from the dark recording.
inline std::vector<EtaSeriesPoint> points_blind_mode(const VoltageEnsemble& dark,
                                                     const std::vector<VoltageEnsemble>& series) {
  double dark_mean = 0.0;
  const auto mu = sample_central_moments(dark.samples, 2, &dark_mean);
  std::vector<EtaSeriesPoint> pts;
  for (const auto& e : series) pts.push_back(measure_point(subtract_offset(e, dark_mean), mu[2]));
  return pts;
}

struct CalibrationOutcome {
  CalibrationFit fit;
  std::optional<MeanConstancyReport> constancy;
  std::optional<GainScalingReport> scaling;
  std::optional<double> sigma_corrected;
};

inline Json calibration_document(const CalibrationOutcome& o, const std::string& mode,
                                 const std::optional<std::string>& hash, const std::optional<RunConfig>& truth) {
  Json j{{"mode", mode}, {"fit", to_json(o.fit)}};
  if (hash) j["config_hash"] = *hash;
  Json checks = Json::object();
  if (o.constancy) checks["mean_constancy"] = to_json(*o.constancy);
  if (o.scaling) checks["gain_scaling"] = to_json(*o.scaling);
  j["checks"] = checks;
  if (truth) {
    const auto source = build_source(*truth);
    const auto gain = build_gain(*truth);
    Json t{{"gamma_bar", gain.gamma_bar()},
           {"sigma", gain.sigma()},
           {"intercept", gain.gamma_bar() + gain.sigma2() / gain.gamma_bar()}};
    if (source.mandel_q()) t["slope"] = *source.mandel_q() / source.mean();
    j["truth"] = t;
    if (o.sigma_corrected) j["sigma_corrected_gamma_bar"] = *o.sigma_corrected;
  }
  return j;
}

inline std::vector<double> reference_means(const RunConfig& c) {
  const auto source = build_source(c);
  std::vector<double> out;
  for (double eta : c.eta_series) out.push_back(apply_bernoulli(source, eta).mean());
  return out;
}

inline CalibrationOutcome calibrate_points(const RunConfig& c, std::vector<EtaSeriesPoint> points,
                                           bool run_scaling) {
  CalibrationOutcome o;
  o.fit = fit_fano_line(points);
  o.sigma_corrected = sigma_corrected_gamma_bar(o.fit.intercept, c.gain.sigma);
  o.constancy = mean_constancy_check(o.fit.points, o.sigma_corrected.value_or(o.fit.intercept), reference_means(c), o.fit.intercept_se);
  if (run_scaling && !c.gain_scale_factors.empty()) {
    o.scaling = gain_scaling_check(build_source(c), build_gain(c), build_dark(c), c.eta_series, c.gain_scale_factors,
                                   c.n_samples, c.seed, c.workers);
  }
  return o;
}

/// `calibrate` in simulation mode: regenerate the sweep from the config.
inline CalibrationOutcome calibrate_simulation(const RunConfig& c) {
  auto pts = run_eta_series(build_source(c), build_gain(c), build_dark(c), c.eta_series, c.n_samples, c.seed,
                            {c.workers, 1.0});
  return calibrate_points(c, std::move(pts), true);
}

struct BlindInputs {
  VoltageEnsemble dark;
  std::vector<VoltageEnsemble> series;
  std::vector<fs::path> files;
};

/// Every *.csv under `dir` except the dark file, in file-name order.
inline BlindInputs load_blind_inputs(const fs::path& dir, const fs::path& dark_file) {
  detail::require(fs::is_directory(dir), ErrorKind::io, "ensemble directory not found: " + dir.string());
  detail::require(fs::exists(dark_file), ErrorKind::io, "dark ensemble not found: " + dark_file.string());
  BlindInputs in;
  in.dark = io::read_ensemble(dark_file).ensemble;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    if (fs::equivalent(entry.path(), dark_file)) continue;
    in.files.push_back(entry.path());
  }
  std::sort(in.files.begin(), in.files.end());
  for (const auto& f : in.files) in.series.push_back(io::read_ensemble(f).ensemble);
  return in;
}

inline Json moments_json(const VoltageEnsemble& ens, int order) {
  Json j = to_json(sample_moments(ens.samples, order));
  const auto se = sample_moment_errors(ens.samples, order);
  Json jse = Json::object();
  jse["mean"] = se[1];
  for (int r = 2; r <= order; ++r) jse[std::to_string(r)] = se[r];
  j["standard_errors"] = jse;
  j["n_samples"] = ens.samples.size();
  return j;
}

struct ReconstructionOutcome {
  ReconstructionResult result;
  SelfConsistencyReport consistency;
  std::optional<ComparisonMetrics> comparison;
};

/// Zero the baseline, rebin at gamma_bar, run the self-consistency check and,
/// when a reference P_m is known, compare against it.
inline ReconstructionOutcome reconstruct_ensemble(const VoltageEnsemble& raw, double dark_mean, double gamma_bar,
                                                  const std::optional<DetectedPhotonDistribution>& reference) {
  ReconstructionOutcome o;
  const auto ens = subtract_offset(raw, dark_mean);
  o.result = rebin(ens, gamma_bar);
  o.consistency = self_consistency_check(o.result, ens);
  if (reference) {
    o.comparison = compare(o.result, *reference);
    o.result.tv_distance = o.comparison->tv_distance;
    o.result.fidelity = o.comparison->fidelity;
  }
  return o;
}

inline void write_reconstruction(const ReconstructionOutcome& o, const fs::path& out,
                                 const std::optional<std::string>& hash) {
  const std::string h = hash.value_or("");
  io::write_file(out / "pm.csv", io::pm_to_csv(o.result, h));
  Json metrics = reconstruction_metrics_json(o.result, o.consistency, o.comparison);
  if (hash) metrics["config_hash"] = *hash;
  io::write_file(out / "pm_metrics.json", dump(metrics));
}

struct ExperimentResult {
  std::string config_hash;
  std::optional<CalibrationOutcome> calibration;
  ReconstructionOutcome reconstruction;
  double gamma_bar_used = 0.0;
  std::string gamma_bar_source;
  bool pass = true;
};

namespace detail {

inline std::string verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

inline std::string fmt(double x, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

inline std::string experiment_report(const RunConfig& c, const SimulatedData& d, const ExperimentResult& r) {
  std::ostringstream md;
  const auto source = build_source(c);
  const auto gain = build_gain(c);
  md << "# Linear-detector photon statistics run\n\n";
  md << "config_hash: `" << r.config_hash << "`\n\n";
  md << "## Setup\n\n";
  md << "- source: " << source.label() << ", <n> = " << fmt(source.mean());
  if (source.mandel_q()) md << ", Q = " << fmt(*source.mandel_q());
  md << "\n";
  md << "- gain: " << c.gain.family << ", gamma_bar = " << fmt(gain.gamma_bar()) << ", sigma = " << fmt(gain.sigma())
     << "\n";
  md << "- dark: sigma0 = " << fmt(c.dark.sigma0) << ", offset = " << fmt(c.dark.offset) << "\n";
  md << "- shots per eta: " << c.n_samples << ", dark shots: " << c.dark_samples << ", seed: " << c.seed
     << ", workers: " << c.workers << "\n\n";

  double dmean = 0.0;
  const auto dmu = sample_central_moments(d.dark.samples, 2, &dmean);
  md << "## Dark statistics\n\n";
  md << "- mean = " << fmt(dmean) << ", variance = " << fmt(dmu[2]) << " (model " << fmt(c.dark.sigma0 * c.dark.sigma0)
     << ")\n\n";

  if (r.calibration) {
    const auto& cal = *r.calibration;
    const auto& f = cal.fit;
    md << "## Calibration sweep\n\n";
    md << "| eta | <v> | se | mu2(v)/<v> | se |\n|---|---|---|---|---|\n";
    for (const auto& p : f.points) {
      md << "| " << fmt(p.eta) << " | " << fmt(p.mean_v) << " | " << fmt(p.se_mean_v) << " | " << fmt(p.fano_v)
         << " | " << fmt(p.se_fano_v) << " |\n";
    }
    md << "\n- slope (Q/<n>) = " << fmt(f.slope) << " +- " << fmt(f.slope_se) << "\n";
    md << "- intercept = " << fmt(f.intercept) << " +- " << fmt(f.intercept_se) << " (truth gamma_bar(1+sigma^2/gamma_bar^2) = "
       << fmt(gain.gamma_bar() + gain.sigma2() / gain.gamma_bar()) << ")\n";
    if (cal.sigma_corrected) md << "- sigma-corrected gamma_bar = " << fmt(*cal.sigma_corrected) << "\n";
    md << "- chi2/dof = " << fmt(f.chi2) << "/" << f.dof << ", R^2 = " << fmt(f.r_squared) << "\n";
    md << "- fit valid: " << (f.valid ? "yes" : "no (intercept <= 0)") << "\n\n";
    md << "## Checks\n\n";
    if (cal.constancy) {
      md << "- mean constancy <v>/<m>: " << verdict(cal.constancy->pass) << " (common ratio "
         << fmt(cal.constancy->weighted_ratio) << " +- " << fmt(cal.constancy->weighted_ratio_se) << ")\n";
    }
    if (cal.scaling) {
      md << "- gain scaling: " << verdict(cal.scaling->pass) << "\n";
      for (const auto& e : cal.scaling->entries) {
        md << "  - g = " << fmt(e.factor) << ": intercept ratio " << fmt(e.ratio) << " +- " << fmt(e.ratio_se) << " "
           << verdict(e.pass) << "\n";
      }
    }
  } else {
    md << "## Calibration\n\nNot applicable: the source carries no light.\n\n## Checks\n\n";
  }
  const auto& rec = r.reconstruction;
  md << "- reconstruction self-consistency: " << verdict(rec.consistency.pass) << " (<m>_hat = "
     << fmt(rec.consistency.mean_m_hat) << ", <v>/gamma_bar = " << fmt(rec.consistency.mean_m_from_v)
     << ", tolerance " << fmt(rec.consistency.tolerance) << ")\n\n";
  md << "## Reconstruction\n\n";
  md << "- gamma_bar used: " << fmt(r.gamma_bar_used) << " (" << r.gamma_bar_source << ")\n";
  md << "- underflow fraction: " << fmt(rec.result.underflow_fraction) << "\n";
  if (rec.comparison) {
    md << "- TV distance to analytic P_m: " << fmt(rec.comparison->tv_distance) << "\n";
    md << "- fidelity: " << fmt(rec.comparison->fidelity) << "\n";
  }
  md << "\nOverall: " << verdict(r.pass) << "\n";
  return md.str();
}

}  // namespace detail

/// simulate -> moments -> calibrate -> reconstruct, writing every artifact.
inline ExperimentResult run_experiment(const RunConfig& c, const fs::path& out) {
  ExperimentResult r;
  r.config_hash = config_hash(c);
  const auto source = build_source(c);
  const auto gain = build_gain(c);
  const auto dark = build_dark(c);

  const SimulatedData data = simulate_data(c);
  write_simulation(c, data, out);

  Json moments = Json::array();
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const auto& e = data.series[i];
    const auto zeroed = subtract_offset(e, c.dark.offset);
    const auto detected = apply_bernoulli(source, e.eta);
    Json entry{{"eta", e.eta},
               {"file", "ensembles/" + eta_file_name(i)},
               {"sample", moments_json(zeroed, c.moment_order)},
               {"analytic", to_json(analytic_voltage_moments(detected, gain, dark, c.moment_order))},
               {"narrow_gain", to_json(narrow_gain_moments(detected, gain.gamma_bar(), c.moment_order))}};
    moments.push_back(entry);
  }
  io::write_file(out / "moments.json", dump(Json{{"config_hash", r.config_hash}, {"series", moments}}));

  if (source.mean() > 0.0) {
    r.calibration = calibrate_points(c, points_simulation_mode(c, data.series), true);
    io::write_file(out / "calibration.json",
                   dump(calibration_document(*r.calibration, "simulation", r.config_hash, c)));
  }

  const int n_eta = static_cast<int>(c.eta_series.size());
  const auto idx = static_cast<std::size_t>(c.reconstruct.eta_index < 0 ? n_eta + c.reconstruct.eta_index
                                                                       : c.reconstruct.eta_index);
  const auto& target = data.series[idx];
  if (c.reconstruct.gamma_bar_source == "calibrated" && r.calibration && r.calibration->fit.valid) {
    r.gamma_bar_used = r.calibration->fit.gamma_bar_est;
    r.gamma_bar_source = "calibrated";
  } else {
    r.gamma_bar_used = gain.gamma_bar();
    r.gamma_bar_source = c.reconstruct.gamma_bar_source == "truth" ? "truth" : "truth (no valid calibration)";
  }
  r.reconstruction =
      reconstruct_ensemble(target, c.dark.offset, r.gamma_bar_used, apply_bernoulli(source, target.eta));
  write_reconstruction(r.reconstruction, out, r.config_hash);

  r.pass = r.reconstruction.consistency.pass;
  if (r.calibration) {
    r.pass = r.pass && r.calibration->fit.valid;
    if (r.calibration->constancy) r.pass = r.pass && r.calibration->constancy->pass;
    if (r.calibration->scaling) r.pass = r.pass && r.calibration->scaling->pass;
  }
  io::write_file(out / "report.md", detail::experiment_report(c, data, r));
  return r;
}

/// Re-derive every artifact of an output directory and verify the stored
/// values; one line per check is written to `log`.
inline bool check_output(const fs::path& dir, std::ostream& log) {
  bool all = true;
  auto line = [&](bool ok, const std::string& what) {
    log << "[" << (ok ? "PASS" : "FAIL") << "] " << what << "\n";
    all = all && ok;
  };
  auto close = [](double a, double b, double rel) {
    return std::fabs(a - b) <= rel * std::max({std::fabs(a), std::fabs(b), 1e-300});
  };

  const Json cfg_doc = Json::parse(io::read_file(dir / "config.json"));
  const RunConfig c = config_from_json(cfg_doc);
  const std::string hash = config_hash(c);
  line(cfg_doc.value("config_hash", "") == hash, "config.json hash matches its content");

  const auto dark_file = io::read_ensemble(dir / "ensembles" / "dark.csv");
  line(dark_file.config_hash == hash, "dark ensemble carries the config hash");
  line(dark_file.ensemble.samples.size() == c.dark_samples, "dark ensemble size");

  std::vector<VoltageEnsemble> series;
  bool sizes = true, hashes = true, etas = true;
  for (std::size_t i = 0; i < c.eta_series.size(); ++i) {
    auto f = io::read_ensemble(dir / "ensembles" / eta_file_name(i));
    sizes = sizes && f.ensemble.samples.size() == c.n_samples;
    hashes = hashes && f.config_hash == hash;
    etas = etas && f.ensemble.eta == c.eta_series[i];
    series.push_back(std::move(f.ensemble));
  }
  line(sizes, "every eta ensemble has n_samples shots");
  line(hashes, "every eta ensemble carries the config hash");
  line(etas, "ensemble eta headers match the configured series");

  const auto source = build_source(c);
  if (source.mean() > 0.0) {
    const Json cal_doc = Json::parse(io::read_file(dir / "calibration.json"));
    line(cal_doc.value("config_hash", "") == hash, "calibration.json carries the config hash");
    const auto stored = fit_from_json(cal_doc);
    const auto pts = points_simulation_mode(c, series);
    bool same = stored.points.size() == pts.size();
    for (std::size_t i = 0; same && i < pts.size(); ++i) {
      same = close(pts[i].mean_v, stored.points[i].mean_v, 1e-12) && close(pts[i].fano_v, stored.points[i].fano_v, 1e-12) &&
             close(pts[i].se_fano_v, stored.points[i].se_fano_v, 1e-9);
    }
    line(same, "sweep points recomputed from ensembles match calibration.json");
    const auto refit = fit_fano_line(pts);
    line(close(refit.slope, stored.slope, 1e-9) && close(refit.intercept, stored.intercept, 1e-12),
         "refit slope and intercept match calibration.json");
    line(refit.valid, "calibration intercept is positive");
    const double chi2_limit = static_cast<double>(refit.dof) + 5.0 * std::sqrt(2.0 * static_cast<double>(refit.dof));
    line(refit.chi2 <= chi2_limit, "sweep points lie on a straight line (chi2 " + detail::fmt(refit.chi2) + " <= " +
                                       detail::fmt(chi2_limit) + ")");
    const auto constancy = mean_constancy_check(refit.points, sigma_corrected_gamma_bar(refit.intercept, c.gain.sigma).value_or(refit.intercept),
                                                 reference_means(c), refit.intercept_se);
    line(constancy.pass, "<v>/<m> is constant across eta and matches the sigma-corrected gamma_bar");
    if (cal_doc.contains("checks") && cal_doc["checks"].contains("gain_scaling")) {
      line(cal_doc["checks"]["gain_scaling"].value("pass", false), "gain-scaling check recorded as passing");
    }
  }

  const auto pm = io::pm_from_csv(io::read_file(dir / "pm.csv"));
  const Json metrics = Json::parse(io::read_file(dir / "pm_metrics.json"));
  line(pm.config_hash == hash && metrics.value("config_hash", "") == hash, "reconstruction files carry the config hash");
  std::uint64_t total = 0;
  long double mass = 0.0L;
  for (std::size_t m = 0; m < pm.counts.size(); ++m) {
    total += pm.counts[m];
    mass += pm.pmf_hat[m];
  }
  line(total == c.n_samples, "pm.csv counts account for every shot");
  line(std::fabs(static_cast<double>(mass) - 1.0) <= 1e-12, "pm.csv probabilities sum to 1");
  const int n_eta = static_cast<int>(c.eta_series.size());
  const auto idx = static_cast<std::size_t>(c.reconstruct.eta_index < 0 ? n_eta + c.reconstruct.eta_index
                                                                       : c.reconstruct.eta_index);
  const double gbar = metrics.at("gamma_bar_used").get<double>();
  const auto redo = rebin(subtract_offset(series[idx], c.dark.offset), gbar);
  line(redo.counts == pm.counts, "rebinning the stored ensemble reproduces pm.csv counts");
  line(self_consistency_check(redo, subtract_offset(series[idx], c.dark.offset)).pass,
       "reconstructed <m> agrees with <v>/gamma_bar");
  return all;
}

}  // namespace linphot

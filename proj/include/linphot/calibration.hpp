#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linphot/detector_model.hpp"
#include "linphot/error.hpp"
#include "linphot/loss_channel.hpp"
#include "linphot/photon_sources.hpp"
#include "linphot/random.hpp"
#include "linphot/stat_engine.hpp"
#include "linphot/summation.hpp"

namespace linphot {

/// One efficiency setting of the calibration sweep.
struct EtaSeriesPoint {
  double eta = 0.0;
  double mean_v = 0.0;
  /// (mu_2(v) - dark variance) / <v>
  double fano_v = 0.0;
  double se_mean_v = 0.0;
  double se_fano_v = 0.0;
  std::size_t n_samples = 0;
};

/// Weighted straight line fano_v = slope * mean_v + intercept.
struct CalibrationFit {
  double slope = 0.0;      // Q/<n>
  double intercept = 0.0;  // gamma_bar (1 + sigma^2/gamma_bar^2)
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double covariance = 0.0;  // cov(slope, intercept)
  double gamma_bar_est = 0.0;
  double r_squared = 0.0;
  double chi2 = 0.0;
  std::size_t dof = 0;
  /// False when the intercept is not positive: the fit is reported, not clamped.
  bool valid = false;
  std::vector<EtaSeriesPoint> points;
};

inline constexpr std::size_t kJackknifeBlocks = 20;
inline constexpr std::size_t kMinSeriesSamples = 10000;

/// Reduce an offset-subtracted ensemble to one sweep point. `dark_variance`
/// is removed from mu_2(v) before dividing by <v>; se_fano_v comes from a
/// delete-one-block jackknife over kJackknifeBlocks contiguous blocks.
inline EtaSeriesPoint measure_point(const VoltageEnsemble& ens, double dark_variance) {
  const auto& x = ens.samples;
  const std::size_t n = x.size();
  detail::require(n >= 2 * kJackknifeBlocks, ErrorKind::insufficient_data,
                  "sweep point needs at least " + std::to_string(2 * kJackknifeBlocks) + " samples");
  double mean = 0.0;
  const auto mu = sample_central_moments(x, 2, &mean);
  EtaSeriesPoint p;
  p.eta = ens.eta;
  p.n_samples = n;
  p.mean_v = mean;
  p.fano_v = (mu[2] - dark_variance) / mean;
  p.se_mean_v = std::sqrt(mu[2] / static_cast<double>(n));

  // Block sums of the shifted data; shifting by the full-sample mean keeps
  // the leave-one-block-out variances well conditioned.
  const long double shift = mean;
  std::vector<long double> s1(kJackknifeBlocks), s2(kJackknifeBlocks), cnt(kJackknifeBlocks);
  for (std::size_t b = 0; b < kJackknifeBlocks; ++b) {
    const std::size_t begin = n * b / kJackknifeBlocks;
    const std::size_t end = n * (b + 1) / kJackknifeBlocks;
    CompensatedSum<long double> a1, a2;
    for (std::size_t i = begin; i < end; ++i) {
      const long double d = static_cast<long double>(x[i]) - shift;
      a1 += d;
      a2 += d * d;
    }
    s1[b] = a1.value();
    s2[b] = a2.value();
    cnt[b] = static_cast<long double>(end - begin);
  }
  long double t1 = 0.0L, t2 = 0.0L, tn = 0.0L;
  for (std::size_t b = 0; b < kJackknifeBlocks; ++b) {
    t1 += s1[b];
    t2 += s2[b];
    tn += cnt[b];
  }
  std::vector<long double> theta(kJackknifeBlocks);
  long double theta_mean = 0.0L;
  for (std::size_t b = 0; b < kJackknifeBlocks; ++b) {
    const long double m = tn - cnt[b];
    const long double d1 = (t1 - s1[b]) / m;
    const long double var = (t2 - s2[b]) / m - d1 * d1;
    const long double mv = shift + d1;
    theta[b] = (var - dark_variance) / mv;
    theta_mean += theta[b];
  }
  theta_mean /= static_cast<long double>(kJackknifeBlocks);
  long double ss = 0.0L;
  for (long double t : theta) ss += (t - theta_mean) * (t - theta_mean);
  const long double bfac = static_cast<long double>(kJackknifeBlocks - 1) / kJackknifeBlocks;
  p.se_fano_v = static_cast<double>(std::sqrt(bfac * ss));
  return p;
}

/// Options shared by the simulated sweeps.
struct SeriesOptions {
  unsigned workers = 1;
  double gain_scale = 1.0;
};

namespace detail {

inline void check_eta_design(std::span<const double> etas) {
  std::vector<double> sorted(etas.begin(), etas.end());
  for (double e : sorted) {
    require(std::isfinite(e) && e > 0.0 && e <= 1.0, ErrorKind::invalid_parameter,
            "sweep efficiencies must lie in (0, 1], got " + std::to_string(e));
  }
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  require(distinct >= 3, ErrorKind::insufficient_design,
          "calibration needs at least 3 distinct efficiencies, got " + std::to_string(distinct));
}

}  // namespace detail

/// Simulated sweep in simulation mode: each eta gets the substream
/// derive_seed(seed, index), the raw baseline is removed with the known
/// offset and the known dark variance (gain_scale^2 sigma0^2) is subtracted.
inline std::vector<EtaSeriesPoint> run_eta_series(const PhotonNumberDistribution& source, const GainModel& gain,
                                                  const DarkNoiseModel& dark, std::span<const double> etas,
                                                  std::size_t n_samples, std::uint64_t seed,
                                                  const SeriesOptions& opts = {}) {
  detail::check_eta_design(etas);
  detail::require(n_samples >= kMinSeriesSamples, ErrorKind::invalid_parameter,
                  "sweep points need at least " + std::to_string(kMinSeriesSamples) + " samples");
  const double g = opts.gain_scale;
  const double dark_var = g * g * dark.sigma0 * dark.sigma0;
  std::vector<EtaSeriesPoint> points;
  points.reserve(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) {
    SimulationOptions sim{opts.workers, g, false};
    VoltageEnsemble ens = simulate_ensemble(source, etas[i], gain, dark, n_samples, derive_seed(seed, i), sim);
    const double offset = g * dark.offset_raw;
    if (offset != 0.0) {
      for (double& v : ens.samples) v -= offset;
    }
    points.push_back(measure_point(ens, dark_var));
  }
  return points;
}

/// Weighted least squares with weights 1/se_fano_v^2. Standard errors come
/// from the inverse normal matrix (per-point variances taken as known).
inline CalibrationFit fit_fano_line(std::span<const EtaSeriesPoint> points) {
  detail::require(points.size() >= 3, ErrorKind::insufficient_design,
                  "line fit needs at least 3 points, got " + std::to_string(points.size()));
  long double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : points) {
    detail::require(std::isfinite(p.mean_v) && std::isfinite(p.fano_v), ErrorKind::invalid_parameter,
                    "sweep point is not finite");
    detail::require(std::isfinite(p.se_fano_v) && p.se_fano_v > 0.0, ErrorKind::invalid_parameter,
                    "sweep point standard error must be positive");
    const long double w = 1.0L / (static_cast<long double>(p.se_fano_v) * p.se_fano_v);
    sw += w;
    sx += w * p.mean_v;
    sy += w * p.fano_v;
  }
  const long double xbar = sx / sw;
  const long double ybar = sy / sw;
  for (const auto& p : points) {
    const long double w = 1.0L / (static_cast<long double>(p.se_fano_v) * p.se_fano_v);
    const long double dx = p.mean_v - xbar;
    sxx += w * dx * dx;
    sxy += w * dx * (p.fano_v - ybar);
  }
  const long double xscale = std::max(std::fabs(xbar), 1.0L);
  detail::require(sxx > sw * xscale * xscale * 1e-24L, ErrorKind::singular_fit,
                  "sweep points share the same <v>; slope is undetermined");
  CalibrationFit fit;
  const long double slope = sxy / sxx;
  const long double intercept = ybar - slope * xbar;
  fit.slope = static_cast<double>(slope);
  fit.intercept = static_cast<double>(intercept);
  fit.slope_se = static_cast<double>(std::sqrt(1.0L / sxx));
  fit.intercept_se = static_cast<double>(std::sqrt(1.0L / sw + xbar * xbar / sxx));
  fit.covariance = static_cast<double>(-xbar / sxx);
  long double chi2 = 0, syy = 0;
  for (const auto& p : points) {
    const long double w = 1.0L / (static_cast<long double>(p.se_fano_v) * p.se_fano_v);
    const long double r = p.fano_v - (intercept + slope * p.mean_v);
    chi2 += w * r * r;
    syy += w * (p.fano_v - ybar) * (p.fano_v - ybar);
  }
  fit.chi2 = static_cast<double>(chi2);
  fit.dof = points.size() - 2;
  fit.r_squared = syy > 0 ? static_cast<double>(1.0L - chi2 / syy) : 1.0;
  fit.gamma_bar_est = fit.intercept;
  fit.valid = fit.intercept > 0.0;
  fit.points.assign(points.begin(), points.end());
  return fit;
}

/// Solve intercept = gamma_bar + sigma^2/gamma_bar for gamma_bar given a
/// known sigma (simulation mode). Empty when no real root exists.
inline std::optional<double> sigma_corrected_gamma_bar(double intercept, double sigma) {
  const double disc = intercept * intercept - 4.0 * sigma * sigma;
  if (intercept <= 0.0 || disc < 0.0) return std::nullopt;
  return 0.5 * (intercept + std::sqrt(disc));
}

struct GainScalingEntry {
  double factor = 1.0;
  CalibrationFit fit;
  double ratio = 1.0;
  double ratio_se = 0.0;
  bool pass = false;
};

struct GainScalingReport {
  CalibrationFit baseline;
  std::vector<GainScalingEntry> entries;
  double tolerance_se = 3.0;
  bool pass = false;
};

/// Seed for the sweep recorded at gain factor g; the unit factor is the
/// baseline sweep itself.
inline std::uint64_t gain_factor_seed(std::uint64_t seed, double factor) {
  if (factor == 1.0) return seed;
  return derive_seed(seed, std::bit_cast<std::uint64_t>(factor));
}

/// Repeat the sweep with every voltage scaled by each known factor g and
/// require intercept(g)/intercept(1) = g within tolerance_se combined SEs.
inline GainScalingReport gain_scaling_check(const PhotonNumberDistribution& source, const GainModel& gain,
                                            const DarkNoiseModel& dark, std::span<const double> etas,
                                            std::span<const double> factors, std::size_t n_samples,
                                            std::uint64_t seed, unsigned workers = 1, double tolerance_se = 3.0) {
  for (double g : factors) {
    detail::require(std::isfinite(g) && g > 0.0, ErrorKind::invalid_parameter, "gain factors must be positive");
  }
  GainScalingReport report;
  report.tolerance_se = tolerance_se;
  report.baseline = fit_fano_line(run_eta_series(source, gain, dark, etas, n_samples, seed, {workers, 1.0}));
  report.pass = report.baseline.valid;
  const double i1 = report.baseline.intercept;
  const double rel1 = report.baseline.intercept_se / i1;
  for (double g : factors) {
    GainScalingEntry e;
    e.factor = g;
    e.fit = g == 1.0 ? report.baseline
                     : fit_fano_line(run_eta_series(source, gain, dark, etas, n_samples, gain_factor_seed(seed, g),
                                                    {workers, g}));
    e.ratio = e.fit.intercept / i1;
    if (g == 1.0) {
      e.ratio_se = 0.0;
      e.pass = true;
    } else {
      const double relg = e.fit.intercept_se / e.fit.intercept;
      e.ratio_se = std::fabs(e.ratio) * std::sqrt(relg * relg + rel1 * rel1);
      e.pass = e.fit.valid && std::fabs(e.ratio - g) <= tolerance_se * e.ratio_se;
    }
    report.pass = report.pass && e.pass;
    report.entries.push_back(std::move(e));
  }
  return report;
}

struct MeanConstancyEntry {
  double eta = 0.0;
  double ratio = 0.0;  // <v> / <m>
  double ratio_se = 0.0;
  double z_constancy = 0.0;
  bool pass = false;
};

struct MeanConstancyReport {
  std::vector<MeanConstancyEntry> entries;
  double weighted_ratio = 0.0;
  double weighted_ratio_se = 0.0;
  double z_gamma_bar = 0.0;
  bool constant = false;
  bool matches_gamma_bar = false;
  bool pass = false;
};

/// <v> = <m> gamma_bar at every eta: each ratio <v>/<m> must sit within
/// tolerance_se of the weighted common value, and that value within
/// tolerance_se combined SEs of the calibrated gamma_bar.
inline MeanConstancyReport mean_constancy_check(std::span<const EtaSeriesPoint> points, double gamma_bar_est,
                                                std::span<const double> reference_mean_m,
                                                double gamma_bar_se = 0.0, double tolerance_se = 5.0) {
  detail::require(points.size() == reference_mean_m.size(), ErrorKind::invalid_parameter,
                  "need one reference <m> per sweep point");
  detail::require(!points.empty(), ErrorKind::insufficient_design, "no sweep points");
  MeanConstancyReport rep;
  long double sw = 0, swr = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    detail::require(reference_mean_m[i] > 0.0, ErrorKind::invalid_parameter, "reference <m> must be positive");
    MeanConstancyEntry e;
    e.eta = points[i].eta;
    e.ratio = points[i].mean_v / reference_mean_m[i];
    e.ratio_se = points[i].se_mean_v / reference_mean_m[i];
    const long double w = e.ratio_se > 0 ? 1.0L / (static_cast<long double>(e.ratio_se) * e.ratio_se) : 1.0L;
    sw += w;
    swr += w * e.ratio;
    rep.entries.push_back(e);
  }
  rep.weighted_ratio = static_cast<double>(swr / sw);
  rep.weighted_ratio_se = static_cast<double>(std::sqrt(1.0L / sw));
  rep.constant = true;
  for (auto& e : rep.entries) {
    const double d = e.ratio - rep.weighted_ratio;
    e.z_constancy = e.ratio_se > 0 ? d / e.ratio_se : (d == 0.0 ? 0.0 : INFINITY);
    e.pass = std::fabs(e.z_constancy) <= tolerance_se;
    rep.constant = rep.constant && e.pass;
  }
  const double comb = std::hypot(rep.weighted_ratio_se, gamma_bar_se);
  const double diff = rep.weighted_ratio - gamma_bar_est;
  rep.z_gamma_bar = comb > 0 ? diff / comb : (diff == 0.0 ? 0.0 : INFINITY);
  rep.matches_gamma_bar = std::fabs(rep.z_gamma_bar) <= tolerance_se;
  rep.pass = rep.constant && rep.matches_gamma_bar;
  return rep;
}

}  // namespace linphot

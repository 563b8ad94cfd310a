#pragma once

#include <algorithm>
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
#include "linphot/stat_engine.hpp"
#include "linphot/summation.hpp"

namespace linphot {

/// Histogram of voltages in bins of width gamma_bar centered on m * gamma_bar.
struct ReconstructionResult {
  std::vector<double> pmf_hat;
  std::vector<std::uint64_t> counts;
  std::size_t n_samples = 0;
  double gamma_bar_used = 0.0;
  /// Fraction of shots with v < -gamma_bar/2, folded into m = 0.
  double underflow_fraction = 0.0;
  /// Upward shift of mean_m_hat caused by that folding (in detected photons).
  double underflow_shift = 0.0;
  double mean_m_hat = 0.0;
  std::optional<double> tv_distance;
  std::optional<double> fidelity;
};

inline VoltageEnsemble subtract_offset(const VoltageEnsemble& ens, double dark_mean) {
  detail::require(std::isfinite(dark_mean), ErrorKind::invalid_parameter, "dark mean must be finite");
  VoltageEnsemble out = ens;
  if (dark_mean != 0.0) {
    for (double& v : out.samples) v -= dark_mean;
  }
  return out;
}

/// Mean of a zero-light recording, i.e. the raw baseline to subtract.
inline double estimate_dark_offset(const VoltageEnsemble& dark) {
  detail::require(!dark.samples.empty(), ErrorKind::insufficient_data, "empty dark ensemble");
  CompensatedSum<long double> s;
  for (double v : dark.samples) s += v;
  return static_cast<double>(s.value() / static_cast<long double>(dark.samples.size()));
}

/// Bin index for one voltage: floor(v/gamma_bar + 1/2), may be negative.
inline std::int64_t voltage_bin(double v, double gamma_bar) {
  return static_cast<std::int64_t>(std::floor(v / gamma_bar + 0.5));
}

/// Divide by gamma_bar and round into unit bins; negative bins fold into 0.
inline ReconstructionResult rebin(const VoltageEnsemble& ens, double gamma_bar) {
  detail::require(std::isfinite(gamma_bar) && gamma_bar > 0.0, ErrorKind::invalid_parameter,
                  "rebinning width must be positive, got " + std::to_string(gamma_bar));
  detail::require(!ens.samples.empty(), ErrorKind::insufficient_data, "empty ensemble");
  ReconstructionResult res;
  res.gamma_bar_used = gamma_bar;
  res.n_samples = ens.samples.size();
  std::uint64_t under = 0;
  long double folded = 0.0L;
  for (double v : ens.samples) {
    detail::require(std::isfinite(v), ErrorKind::invalid_parameter, "ensemble contains a non-finite voltage");
    std::int64_t m = voltage_bin(v, gamma_bar);
    if (m < 0) {
      ++under;
      folded += static_cast<long double>(-m);
      m = 0;
    }
    const auto idx = static_cast<std::size_t>(m);
    if (idx >= res.counts.size()) res.counts.resize(idx + 1, 0);
    ++res.counts[idx];
  }
  const long double n = static_cast<long double>(res.n_samples);
  res.pmf_hat.resize(res.counts.size());
  CompensatedSum<long double> mean;
  for (std::size_t m = 0; m < res.counts.size(); ++m) {
    res.pmf_hat[m] = static_cast<double>(static_cast<long double>(res.counts[m]) / n);
    mean += static_cast<long double>(m) * static_cast<long double>(res.counts[m]);
  }
  res.mean_m_hat = static_cast<double>(mean.value() / n);
  res.underflow_fraction = static_cast<double>(static_cast<long double>(under) / n);
  res.underflow_shift = static_cast<double>(folded / n);
  return res;
}

struct SelfConsistencyReport {
  double mean_m_hat = 0.0;
  double mean_m_from_v = 0.0;
  double difference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// <m> of the rebinned histogram against <v>/gamma_bar. Allowed deviation:
/// n_se standard errors of <v>/gamma_bar plus the known upward shift from
/// folding underflow into m = 0.
inline SelfConsistencyReport self_consistency_check(const ReconstructionResult& res, double ensemble_mean_v,
                                                    double se_mean_v, double n_se = 5.0) {
  detail::require(res.gamma_bar_used > 0.0, ErrorKind::invalid_parameter, "reconstruction has no bin width");
  SelfConsistencyReport rep;
  rep.mean_m_hat = res.mean_m_hat;
  rep.mean_m_from_v = ensemble_mean_v / res.gamma_bar_used;
  rep.difference = rep.mean_m_hat - rep.mean_m_from_v;
  rep.tolerance = n_se * se_mean_v / res.gamma_bar_used + res.underflow_shift;
  rep.pass = std::fabs(rep.difference) <= rep.tolerance;
  return rep;
}

/// Self-consistency straight from the ensemble that was rebinned.
inline SelfConsistencyReport self_consistency_check(const ReconstructionResult& res, const VoltageEnsemble& ens,
                                                    double n_se = 5.0) {
  double mean = 0.0;
  const auto mu = sample_central_moments(ens.samples, 2, &mean);
  return self_consistency_check(res, mean, std::sqrt(mu[2] / static_cast<double>(ens.samples.size())), n_se);
}

struct ComparisonMetrics {
  double tv_distance = 0.0;
  double fidelity = 0.0;
  /// (p_hat - p) / sqrt(p (1 - p) / N) per bin; 0 where p is 0 or 1.
  std::vector<double> z_scores;
};

inline ComparisonMetrics compare_pmf(std::span<const double> estimate, std::span<const double> reference,
                                     std::size_t n_samples) {
  const std::size_t size = std::max(estimate.size(), reference.size());
  ComparisonMetrics out;
  out.z_scores.assign(size, 0.0);
  CompensatedSum<long double> tv, fid;
  for (std::size_t m = 0; m < size; ++m) {
    const double ph = m < estimate.size() ? estimate[m] : 0.0;
    const double p = m < reference.size() ? reference[m] : 0.0;
    tv += std::fabs(ph - p);
    fid += std::sqrt(ph * p);
    if (n_samples > 0 && p > 0.0 && p < 1.0) {
      out.z_scores[m] = (ph - p) / std::sqrt(p * (1.0 - p) / static_cast<double>(n_samples));
    }
  }
  out.tv_distance = static_cast<double>(0.5L * tv.value());
  out.fidelity = static_cast<double>(fid.value());
  return out;
}

/// TV distance, Bhattacharyya fidelity and per-bin multinomial z-scores of a
/// reconstruction against a reference P_m.
inline ComparisonMetrics compare(const ReconstructionResult& res, const DetectedPhotonDistribution& reference) {
  return compare_pmf(res.pmf_hat, reference.pmf(), res.n_samples);
}

}  // namespace linphot

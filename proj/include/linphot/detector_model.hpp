#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "linphot/error.hpp"
#include "linphot/loss_channel.hpp"
#include "linphot/photon_sources.hpp"
#include "linphot/random.hpp"

namespace linphot {

enum class GainFamily { gaussian, gamma, empirical };

constexpr std::string_view to_string(GainFamily f) noexcept {
  switch (f) {
    case GainFamily::gaussian: return "gaussian";
    case GainFamily::gamma: return "gamma";
    case GainFamily::empirical: return "empirical";
  }
  return "unknown";
}

/// Tabulated single-photon conversion density on an increasing grid; linearly
/// interpolated between nodes.
struct EmpiricalTable {
  std::vector<double> gamma;
  std::vector<double> density;
};

/// Distribution p_gamma of the single-photon conversion factor gamma.
class GainModel {
 public:
  GainFamily family() const noexcept { return family_; }
  double gamma_bar() const noexcept { return gamma_bar_; }
  double sigma2() const noexcept { return sigma2_; }
  double sigma() const noexcept { return std::sqrt(sigma2_); }
  /// Central moment of p_gamma, r in [2, 5].
  double central_moment(int r) const { return central_.at(static_cast<std::size_t>(r)); }
  /// Cumulant kappa_r of p_gamma, r in [1, 5].
  double cumulant(int r) const { return cumulants_.at(static_cast<std::size_t>(r)); }
  const std::array<double, 6>& cumulants() const noexcept { return cumulants_; }
  const std::optional<EmpiricalTable>& table() const noexcept { return table_; }

  /// Sum of `m` independent conversion factors.
  double sample_sum(std::uint64_t m, RngStream& rng) const {
    if (m == 0) return 0.0;
    const double k = static_cast<double>(m);
    switch (family_) {
      case GainFamily::gaussian: {
        // Sum of m i.i.d. normals is N(m gamma_bar, m sigma^2).
        if (sigma2_ == 0.0) return k * gamma_bar_;
        std::normal_distribution<double> z(0.0, 1.0);
        return k * gamma_bar_ + std::sqrt(k * sigma2_) * z(rng);
      }
      case GainFamily::gamma: {
        // Gamma(shape a, scale t) sums to Gamma(m a, t).
        if (sigma2_ == 0.0) return k * gamma_bar_;
        std::gamma_distribution<double> g(k * shape_, scale_);
        return g(rng);
      }
      case GainFamily::empirical: {
        double sum = 0.0;
        for (std::uint64_t i = 0; i < m; ++i) sum += sample_table(uniform01(rng));
        return sum;
      }
    }
    return 0.0;
  }

  friend GainModel make_gain(GainFamily family, double gamma_bar, double sigma,
                             std::optional<EmpiricalTable> table);

 private:
  // Inverse CDF of the piecewise-linear density.
  double sample_table(double u) const {
    const auto& g = table_->gamma;
    const auto& f = table_->density;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t seg = it == cdf_.begin() ? 0 : static_cast<std::size_t>(it - cdf_.begin()) - 1;
    seg = std::min(seg, g.size() - 2);
    const double width = g[seg + 1] - g[seg];
    const double fa = f[seg];
    const double slope = (f[seg + 1] - fa) / width;
    const double delta = std::max(0.0, u - cdf_[seg]);
    double t;
    const double disc = fa * fa + 2.0 * slope * delta;
    if (fa + std::sqrt(std::max(0.0, disc)) > 0.0) {
      t = 2.0 * delta / (fa + std::sqrt(std::max(0.0, disc)));
    } else {
      t = 0.0;
    }
    return g[seg] + std::clamp(t, 0.0, width);
  }

  GainFamily family_ = GainFamily::gaussian;
  double gamma_bar_ = 1.0;
  double sigma2_ = 0.0;
  double shape_ = 0.0;
  double scale_ = 0.0;
  std::array<double, 6> central_{};
  std::array<double, 6> cumulants_{};
  std::optional<EmpiricalTable> table_;
  std::vector<double> cdf_;  // node CDF of the normalized table
};

namespace detail {

inline std::array<double, 6> central_from_cumulants_2to5(const std::array<double, 6>& k) {
  std::array<double, 6> c{};
  c[2] = k[2];
  c[3] = k[3];
  c[4] = k[4] + 3.0 * k[2] * k[2];
  c[5] = k[5] + 10.0 * k[2] * k[3];
  return c;
}

inline std::array<double, 6> cumulants_from_central_2to5(double mean, const std::array<double, 6>& c) {
  std::array<double, 6> k{};
  k[1] = mean;
  k[2] = c[2];
  k[3] = c[3];
  k[4] = c[4] - 3.0 * c[2] * c[2];
  k[5] = c[5] - 10.0 * c[2] * c[3];
  return k;
}

// Exact integral of (x - c)^j f(x) over one linear segment of the table.
inline long double segment_moment(long double a, long double b, long double fa, long double fb, long double c,
                                  int j) {
  const long double slope = (fb - fa) / (b - a);
  const long double base = fa + slope * (c - a);
  auto antideriv = [&](long double x) {
    const long double y = x - c;
    return base * std::pow(y, j + 1) / (j + 1) + slope * std::pow(y, j + 2) / (j + 2);
  };
  return antideriv(b) - antideriv(a);
}

}  // namespace detail

/// Build p_gamma. For the empirical family `gamma_bar` and `sigma` are derived
/// from the table and the arguments are ignored.
inline GainModel make_gain(GainFamily family, double gamma_bar, double sigma,
                           std::optional<EmpiricalTable> table = std::nullopt) {
  GainModel g;
  g.family_ = family;
  if (family == GainFamily::empirical) {
    detail::require(table.has_value(), ErrorKind::invalid_parameter, "empirical gain needs a density table");
    const auto& x = table->gamma;
    const auto& f = table->density;
    detail::require(x.size() >= 2 && x.size() == f.size(), ErrorKind::invalid_parameter,
                    "empirical gain table needs >= 2 matching grid and density entries");
    for (std::size_t i = 0; i < x.size(); ++i) {
      detail::require(std::isfinite(x[i]) && x[i] >= 0.0, ErrorKind::invalid_parameter,
                      "empirical gain grid must be finite and nonnegative");
      detail::require(std::isfinite(f[i]) && f[i] >= 0.0, ErrorKind::invalid_parameter,
                      "empirical gain density must be finite and nonnegative");
      if (i > 0) {
        detail::require(x[i] > x[i - 1], ErrorKind::invalid_parameter,
                        "empirical gain grid must be strictly increasing");
      }
    }
    long double norm = 0.0L;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) norm += detail::segment_moment(x[i], x[i + 1], f[i], f[i + 1], 0.0L, 0);
    detail::require(norm > 0.0L, ErrorKind::invalid_parameter, "empirical gain density integrates to zero");
    EmpiricalTable normalized{x, f};
    for (double& d : normalized.density) d = static_cast<double>(d / norm);
    long double mean = 0.0L;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      mean += detail::segment_moment(x[i], x[i + 1], normalized.density[i], normalized.density[i + 1], 0.0L, 1);
    }
    detail::require(mean > 0.0L, ErrorKind::invalid_parameter, "empirical gain must have a positive mean");
    std::array<double, 6> central{};
    for (int r = 2; r <= 5; ++r) {
      long double acc = 0.0L;
      for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        acc += detail::segment_moment(x[i], x[i + 1], normalized.density[i], normalized.density[i + 1], mean, r);
      }
      central[r] = static_cast<double>(acc);
    }
    g.cdf_.assign(x.size(), 0.0);
    long double running = 0.0L;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      running += detail::segment_moment(x[i], x[i + 1], normalized.density[i], normalized.density[i + 1], 0.0L, 0);
      g.cdf_[i + 1] = static_cast<double>(running);
    }
    g.gamma_bar_ = static_cast<double>(mean);
    g.sigma2_ = central[2];
    g.central_ = central;
    g.cumulants_ = detail::cumulants_from_central_2to5(g.gamma_bar_, central);
    g.table_ = std::move(normalized);
    return g;
  }

  detail::require(std::isfinite(gamma_bar) && gamma_bar > 0.0, ErrorKind::invalid_parameter,
                  "mean conversion factor must be positive, got " + std::to_string(gamma_bar));
  detail::require(std::isfinite(sigma) && sigma >= 0.0, ErrorKind::invalid_parameter,
                  "conversion-factor spread must be nonnegative, got " + std::to_string(sigma));
  g.gamma_bar_ = gamma_bar;
  g.sigma2_ = sigma * sigma;
  std::array<double, 6> k{};
  k[1] = gamma_bar;
  k[2] = g.sigma2_;
  if (family == GainFamily::gamma && g.sigma2_ > 0.0) {
    // kappa_r = shape * scale^r * (r-1)!
    g.shape_ = gamma_bar * gamma_bar / g.sigma2_;
    g.scale_ = g.sigma2_ / gamma_bar;
    double factorial = 1.0;
    for (int r = 2; r <= 5; ++r) {
      factorial *= (r - 1);
      k[r] = g.shape_ * std::pow(g.scale_, r) * factorial;
    }
  }
  g.cumulants_ = k;
  g.central_ = detail::central_from_cumulants_2to5(k);
  return g;
}

/// Zero-light voltage distribution: Gaussian electronics noise around a raw
/// baseline. After zeroing the working dark distribution has mean 0.
struct DarkNoiseModel {
  double sigma0 = 0.0;
  double offset_raw = 0.0;
};

inline void validate(const DarkNoiseModel& dark) {
  detail::require(std::isfinite(dark.sigma0) && dark.sigma0 >= 0.0, ErrorKind::invalid_parameter,
                  "dark-noise sigma0 must be nonnegative");
  detail::require(std::isfinite(dark.offset_raw), ErrorKind::invalid_parameter, "dark offset must be finite");
}

/// Recorded shots plus provenance. `latent_m` is only filled by simulation.
struct VoltageEnsemble {
  std::vector<double> samples;
  double eta = 1.0;
  std::uint64_t seed = 0;
  double gain_scale = 1.0;
  std::vector<std::uint32_t> latent_m;

  std::size_t n_samples() const noexcept { return samples.size(); }
};

/// d + sum_{i<=m} gamma_i with d drawn from the zero-mean dark distribution.
inline double sample_voltage(std::uint64_t m, const GainModel& gain, const DarkNoiseModel& dark, RngStream& rng) {
  const double signal = gain.sample_sum(m, rng);
  if (dark.sigma0 == 0.0) return signal;
  std::normal_distribution<double> z(0.0, 1.0);
  return signal + dark.sigma0 * z(rng);
}

struct SimulationOptions {
  unsigned workers = 1;
  double gain_scale = 1.0;
  bool keep_latent = true;
};

/// n_samples shots of the full chain: P_n -> Bernoulli(eta) -> gain -> dark
/// noise -> raw baseline -> scale g. Worker w owns stream (seed, w) and the
/// contiguous shard [w N / W, (w+1) N / W); shards are concatenated in order.
inline VoltageEnsemble simulate_ensemble(const PhotonNumberDistribution& source, double eta, const GainModel& gain,
                                         const DarkNoiseModel& dark, std::size_t n_samples, std::uint64_t seed,
                                         const SimulationOptions& opts = {}) {
  detail::check_eta(eta);
  validate(dark);
  detail::require(n_samples >= 1, ErrorKind::invalid_parameter, "ensemble needs at least one shot");
  detail::require(opts.workers >= 1, ErrorKind::invalid_parameter, "worker count must be >= 1");
  detail::require(std::isfinite(opts.gain_scale) && opts.gain_scale > 0.0, ErrorKind::invalid_parameter,
                  "gain scale must be positive");
  VoltageEnsemble ens;
  ens.eta = eta;
  ens.seed = seed;
  ens.gain_scale = opts.gain_scale;
  ens.samples.resize(n_samples);
  if (opts.keep_latent) ens.latent_m.resize(n_samples);

  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(opts.workers, n_samples));
  auto run_shard = [&](unsigned w) {
    RngStream rng = make_stream(seed, w);
    const std::size_t begin = n_samples * w / workers;
    const std::size_t end = n_samples * (w + 1) / workers;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint64_t m = sample_m(source, eta, rng);
      const double v = sample_voltage(m, gain, dark, rng) + dark.offset_raw;
      ens.samples[i] = opts.gain_scale == 1.0 ? v : opts.gain_scale * v;
      if (opts.keep_latent) ens.latent_m[i] = static_cast<std::uint32_t>(m);
    }
  };
  if (workers == 1) {
    run_shard(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run_shard, w);
    for (auto& t : pool) t.join();
  }
  return ens;
}

/// Zero-light recording used to locate the baseline and its spread.
inline VoltageEnsemble simulate_dark(const DarkNoiseModel& dark, std::size_t n_samples, std::uint64_t seed,
                                     const SimulationOptions& opts = {}) {
  static const GainModel unit = make_gain(GainFamily::gaussian, 1.0, 0.0);
  SimulationOptions o = opts;
  o.keep_latent = false;
  auto ens = simulate_ensemble(make_fock(0), 1.0, unit, dark, n_samples, seed, o);
  ens.eta = 0.0;
  return ens;
}

namespace detail {

inline double normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline double normal_cdf(double x, double mean, double var) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var));
}

inline void check_gaussian_oracle(const DetectedPhotonDistribution& detected, const GainModel& gain,
                                  const DarkNoiseModel& dark) {
  require(gain.family() == GainFamily::gaussian, ErrorKind::unsupported_oracle,
          "closed-form voltage density needs a gaussian gain, got " + std::string(to_string(gain.family())));
  const auto pmf = detected.pmf();
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    const double var = static_cast<double>(k) * gain.sigma2() + dark.sigma0 * dark.sigma0;
    require(pmf[k] == 0.0 || var > 0.0, ErrorKind::invalid_parameter,
            "mixture component " + std::to_string(k) + " is a point mass and has no density");
  }
}

}  // namespace detail

/// P_v = sum_k P_{m=k} N(v; k gamma_bar, k sigma^2 + sigma0^2) on `v_grid`
/// (zeroed voltage scale).
inline std::vector<double> analytic_pv_gaussian(const DetectedPhotonDistribution& detected, const GainModel& gain,
                                                const DarkNoiseModel& dark, std::span<const double> v_grid) {
  detail::check_gaussian_oracle(detected, gain, dark);
  const auto pmf = detected.pmf();
  std::vector<double> out(v_grid.size(), 0.0);
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    if (pmf[k] == 0.0) continue;
    const double mean = static_cast<double>(k) * gain.gamma_bar();
    const double var = static_cast<double>(k) * gain.sigma2() + dark.sigma0 * dark.sigma0;
    for (std::size_t i = 0; i < v_grid.size(); ++i) out[i] += pmf[k] * detail::normal_pdf(v_grid[i], mean, var);
  }
  return out;
}

/// Cumulative distribution of the same mixture.
inline std::vector<double> analytic_cdf_gaussian(const DetectedPhotonDistribution& detected, const GainModel& gain,
                                                 const DarkNoiseModel& dark, std::span<const double> v_grid) {
  detail::check_gaussian_oracle(detected, gain, dark);
  const auto pmf = detected.pmf();
  std::vector<double> out(v_grid.size(), 0.0);
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    if (pmf[k] == 0.0) continue;
    const double mean = static_cast<double>(k) * gain.gamma_bar();
    const double var = static_cast<double>(k) * gain.sigma2() + dark.sigma0 * dark.sigma0;
    for (std::size_t i = 0; i < v_grid.size(); ++i) out[i] += pmf[k] * detail::normal_cdf(v_grid[i], mean, var);
  }
  return out;
}

}  // namespace linphot

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "linphot/detector_model.hpp"
#include "linphot/error.hpp"
#include "linphot/loss_channel.hpp"
#include "linphot/summation.hpp"

namespace linphot {

/// Highest moment/cumulant order handled by the engine.
inline constexpr int kMaxOrder = 5;

/// Moments of a scalar variable up to `order`.
///
/// `central[r]` is mu_r = <(x - <x>)^r> and `raw[r]` is mu'_r = <x^r>; both
/// are indexed by r with central[0] = raw[0] = 1 and central[1] = 0.
struct MomentSet {
  int order = 2;
  double mean = 0.0;
  std::array<double, kMaxOrder + 1> central{};
  std::array<double, kMaxOrder + 1> raw{};
};

/// Cumulants kappa_1..kappa_order, indexed by r (kappa[0] unused).
struct CumulantSet {
  int order = 2;
  std::array<double, kMaxOrder + 1> kappa{};
};

namespace detail {

constexpr long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

inline void check_order(int order, int lo = 1) {
  require(order >= lo && order <= kMaxOrder, ErrorKind::unsupported_order,
          "moment order must lie in [" + std::to_string(lo) + ", " + std::to_string(kMaxOrder) + "], got " +
              std::to_string(order));
}

}  // namespace detail

/// Raw moments from cumulants through
///   mu'_j = kappa_j + sum_{s=1}^{j-1} C(j-1, s-1) kappa_s mu'_{j-s}.
///
/// Generic in the scalar so the expansion can be evaluated over any
/// commutative ring (T needs +, -, T*T and long long*T). Entry 0 is left
/// value-initialized.
template <class T, std::size_t N>
std::array<T, N> raw_moments_from_cumulants(const std::array<T, N>& kappa, int order) {
  std::array<T, N> mu{};
  for (int j = 1; j <= order; ++j) {
    T acc = kappa[j];
    for (int s = 1; s <= j - 1; ++s) acc = acc + detail::binomial(j - 1, s - 1) * (kappa[s] * mu[j - s]);
    mu[j] = acc;
  }
  return mu;
}

/// Algebraic inverse of raw_moments_from_cumulants.
template <class T, std::size_t N>
std::array<T, N> cumulants_from_raw_moments(const std::array<T, N>& mu, int order) {
  std::array<T, N> kappa{};
  for (int j = 1; j <= order; ++j) {
    T acc = mu[j];
    for (int s = 1; s <= j - 1; ++s) acc = acc - detail::binomial(j - 1, s - 1) * (kappa[s] * mu[j - s]);
    kappa[j] = acc;
  }
  return kappa;
}

/// Raw moments from central moments and the mean (binomial expansion).
inline std::array<double, kMaxOrder + 1> raw_from_central(double mean, const std::array<double, kMaxOrder + 1>& central,
                                                          int order) {
  std::array<double, kMaxOrder + 1> raw{};
  raw[0] = 1.0;
  for (int r = 1; r <= order; ++r) {
    long double acc = 0.0L;
    for (int j = 0; j <= r; ++j) {
      const long double c = j == 0 ? 1.0L : (j == 1 ? 0.0L : static_cast<long double>(central[j]));
      acc += detail::binomial(r, j) * c * std::pow(static_cast<long double>(mean), r - j);
    }
    raw[r] = static_cast<double>(acc);
  }
  return raw;
}

inline MomentSet moments_from_cumulants(const CumulantSet& c) {
  detail::check_order(c.order);
  std::array<long double, kMaxOrder + 1> k{};
  for (int r = 1; r <= c.order; ++r) k[r] = c.kappa[r];
  const auto raw = raw_moments_from_cumulants(k, c.order);
  // Central moments are the raw moments of the variable with kappa_1 = 0.
  auto centered = k;
  centered[1] = 0.0L;
  const auto central = raw_moments_from_cumulants(centered, c.order);
  MomentSet m;
  m.order = c.order;
  m.mean = c.kappa[1];
  m.raw[0] = 1.0;
  m.central[0] = 1.0;
  for (int r = 1; r <= c.order; ++r) m.raw[r] = static_cast<double>(raw[r]);
  for (int r = 2; r <= c.order; ++r) m.central[r] = static_cast<double>(central[r]);
  return m;
}

inline CumulantSet cumulants_from_moments(const MomentSet& m) {
  detail::check_order(m.order);
  std::array<long double, kMaxOrder + 1> centered{};
  for (int r = 2; r <= m.order; ++r) centered[r] = m.central[r];
  const auto k = cumulants_from_raw_moments(centered, m.order);
  CumulantSet c;
  c.order = m.order;
  c.kappa[1] = m.mean;
  for (int r = 2; r <= m.order; ++r) c.kappa[r] = static_cast<double>(k[r]);
  return c;
}

/// Cumulants of a sum of k i.i.d. copies.
inline CumulantSet scale_cumulants(const CumulantSet& c, unsigned long long k) {
  CumulantSet out = c;
  for (int r = 1; r <= c.order; ++r) out.kappa[r] = static_cast<double>(k) * c.kappa[r];
  return out;
}

inline CumulantSet gain_cumulants(const GainModel& gain, int order = kMaxOrder) {
  detail::check_order(order);
  CumulantSet c;
  c.order = order;
  for (int r = 1; r <= order; ++r) c.kappa[r] = gain.cumulant(r);
  return c;
}

/// Central moments mu_0..mu_max_order of a sample (plug-in, two-pass,
/// compensated). mu_0 = 1 and mu_1 = 0 by construction.
inline std::vector<double> sample_central_moments(std::span<const double> x, int max_order, double* mean_out = nullptr) {
  detail::require(x.size() >= 2, ErrorKind::insufficient_data,
                  "moment estimation needs at least 2 samples, got " + std::to_string(x.size()));
  CompensatedSum<long double> first;
  for (double v : x) first += v;
  const long double n = static_cast<long double>(x.size());
  const long double mean = first.value() / n;
  std::vector<CompensatedSum<long double>> acc(static_cast<std::size_t>(max_order) + 1);
  for (double v : x) {
    const long double d = static_cast<long double>(v) - mean;
    long double p = d;
    for (int r = 2; r <= max_order; ++r) {
      p *= d;
      acc[r] += p;
    }
  }
  std::vector<double> mu(static_cast<std::size_t>(max_order) + 1, 0.0);
  mu[0] = 1.0;
  for (int r = 2; r <= max_order; ++r) mu[r] = static_cast<double>(acc[r].value() / n);
  if (mean_out) *mean_out = static_cast<double>(mean);
  return mu;
}

/// Plug-in moment estimates up to `order` in [2, 5].
inline MomentSet sample_moments(std::span<const double> x, int order) {
  detail::check_order(order, 2);
  double mean = 0.0;
  const auto mu = sample_central_moments(x, order, &mean);
  MomentSet m;
  m.order = order;
  m.mean = mean;
  m.central[0] = 1.0;
  for (int r = 2; r <= order; ++r) m.central[r] = mu[r];
  m.raw = raw_from_central(mean, m.central, order);
  return m;
}

/// Asymptotic standard errors of the plug-in estimates: index 1 is the mean,
/// index r >= 2 is mu_r (delta-method variance
/// [mu_2r - mu_r^2 - 2r mu_{r-1} mu_{r+1} + r^2 mu_2 mu_{r-1}^2] / N).
inline std::array<double, kMaxOrder + 1> sample_moment_errors(std::span<const double> x, int order) {
  detail::check_order(order, 2);
  const auto mu = sample_central_moments(x, 2 * order);
  const double n = static_cast<double>(x.size());
  std::array<double, kMaxOrder + 1> se{};
  se[1] = std::sqrt(mu[2] / n);
  for (int r = 2; r <= order; ++r) {
    const double var = mu[2 * r] - mu[r] * mu[r] - 2.0 * r * mu[r - 1] * mu[r + 1] + r * r * mu[2] * mu[r - 1] * mu[r - 1];
    se[r] = std::sqrt(std::max(var, 0.0) / n);
  }
  return se;
}

/// Exact moments of the voltage mixture P_v = sum_k P_{m=k} P_v^(k).
///
/// Each component v^(k) is the sum of k conversion factors plus dark noise,
/// so its cumulants are k kappa_r(gamma) + kappa_r(dark). The binomial
/// re-centering on <v> = <m> gamma_bar is folded into the first cumulant of
/// each component before the moment recursion, which keeps the sum free of
/// the large cancelling terms of the expanded form.
inline MomentSet analytic_voltage_moments(const DetectedPhotonDistribution& detected, const GainModel& gain,
                                          const DarkNoiseModel& dark, int order) {
  detail::check_order(order, 2);
  const auto pmf = detected.pmf();
  const long double gbar = gain.gamma_bar();
  const long double mean_v = static_cast<long double>(detected.mean()) * gbar;
  std::array<CompensatedSum<long double>, kMaxOrder + 1> acc;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    if (pmf[k] == 0.0) continue;
    const long double kk = static_cast<long double>(k);
    std::array<long double, kMaxOrder + 1> kappa{};
    kappa[1] = kk * gbar - mean_v;
    for (int r = 2; r <= order; ++r) kappa[r] = kk * static_cast<long double>(gain.cumulant(r));
    kappa[2] += static_cast<long double>(dark.sigma0) * dark.sigma0;
    const auto mu = raw_moments_from_cumulants(kappa, order);
    for (int r = 2; r <= order; ++r) acc[r] += pmf[k] * mu[r];
  }
  MomentSet m;
  m.order = order;
  m.mean = static_cast<double>(mean_v);
  m.central[0] = 1.0;
  for (int r = 2; r <= order; ++r) m.central[r] = static_cast<double>(acc[r].value());
  m.raw = raw_from_central(m.mean, m.central, order);
  return m;
}

/// Narrow-gain limit: mu_r(v) = gamma_bar^r mu_r(m).
inline MomentSet narrow_gain_moments(const DetectedPhotonDistribution& detected, double gamma_bar, int order) {
  detail::check_order(order, 2);
  MomentSet m;
  m.order = order;
  m.mean = detected.mean() * gamma_bar;
  m.central[0] = 1.0;
  for (int r = 2; r <= order; ++r) m.central[r] = std::pow(gamma_bar, r) * detected.central_moment(r);
  m.raw = raw_from_central(m.mean, m.central, order);
  return m;
}

/// mu_2(v)/<v> = gamma_bar [mu_2(m)/<m> + sigma^2/gamma_bar^2] (no dark noise).
inline double exact_second_ratio(const DetectedPhotonDistribution& detected, const GainModel& gain) {
  detail::require(detected.mean() > 0.0, ErrorKind::undefined_statistic, "<m> = 0");
  const double g = gain.gamma_bar();
  return g * (detected.central_moment(2) / detected.mean() + gain.sigma2() / (g * g));
}

/// mu_3(v)/<v> = gamma_bar^2 [mu_3(m)/<m> + 3 (mu_2(m)/<m>) sigma^2/gamma_bar^2
///               + mu~_3/gamma_bar^3] (no dark noise).
inline double exact_third_ratio(const DetectedPhotonDistribution& detected, const GainModel& gain) {
  detail::require(detected.mean() > 0.0, ErrorKind::undefined_statistic, "<m> = 0");
  const double g = gain.gamma_bar();
  const double mean = detected.mean();
  return g * g *
         (detected.central_moment(3) / mean + 3.0 * (detected.central_moment(2) / mean) * gain.sigma2() / (g * g) +
          gain.central_moment(3) / (g * g * g));
}

}  // namespace linphot

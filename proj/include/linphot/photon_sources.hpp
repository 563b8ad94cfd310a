#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linphot/error.hpp"
#include "linphot/pmf.hpp"
#include "linphot/random.hpp"

namespace linphot {

/// Default cumulative tail mass left beyond the truncation index.
inline constexpr double kDefaultTailEpsilon = 1e-12;

/// Photon-number distribution P_n of the light entering the apparatus.
///
/// The PMF is truncated, never renormalized: `tail_mass()` is an upper bound
/// on the probability beyond `n_max()`. Immutable once built.
class PhotonNumberDistribution {
 public:
  PhotonNumberDistribution(std::vector<double> pmf, double tail_mass, std::string label)
      : pmf_(std::move(pmf)), tail_mass_(tail_mass), label_(std::move(label)) {
    detail::require(!pmf_.empty(), ErrorKind::invalid_parameter, "empty photon-number PMF");
    cdf_.reserve(pmf_.size());
    CompensatedSum<long double> running;
    for (double p : pmf_) {
      detail::require(std::isfinite(p) && p >= 0.0, ErrorKind::invalid_parameter,
                      "photon-number PMF entries must be finite and nonnegative");
      running += p;
      cdf_.push_back(static_cast<double>(running.value()));
    }
    detail::require(cdf_.back() > 0.0, ErrorKind::invalid_parameter, "photon-number PMF has no mass");
    const PmfMoments m = pmf_moments(pmf_);
    mean_ = m.mean;
    central_ = m.central;
    if (mean_ > 0.0) mandel_q_ = (central_[2] - mean_) / mean_;
  }

  std::span<const double> pmf() const noexcept { return pmf_; }
  double probability(std::size_t n) const noexcept { return n < pmf_.size() ? pmf_[n] : 0.0; }
  std::size_t n_max() const noexcept { return pmf_.size() - 1; }
  double tail_mass() const noexcept { return tail_mass_; }
  double total_mass() const noexcept { return cdf_.back(); }
  double mean() const noexcept { return mean_; }
  /// Central moment mu_r(n), r in [2, 5].
  double central_moment(int r) const { return central_.at(static_cast<std::size_t>(r)); }
  /// Mandel Q; absent for the vacuum.
  std::optional<double> mandel_q() const noexcept { return mandel_q_; }
  const std::string& label() const noexcept { return label_; }
  std::span<const double> cdf() const noexcept { return cdf_; }

 private:
  std::vector<double> pmf_;
  std::vector<double> cdf_;
  double tail_mass_ = 0.0;
  double mean_ = 0.0;
  std::array<double, 6> central_{};
  std::optional<double> mandel_q_;
  std::string label_;
};

namespace detail {

inline void check_mean(double mean) {
  require(std::isfinite(mean) && mean >= 0.0, ErrorKind::invalid_parameter,
          "mean photon number must be finite and nonnegative, got " + std::to_string(mean));
}

inline void check_epsilon(double eps) {
  require(std::isfinite(eps) && eps > 0.0 && eps < 1.0, ErrorKind::invalid_parameter,
          "tail epsilon must lie in (0, 1)");
}

inline constexpr std::size_t kMaxSupport = std::size_t{1} << 26;

// Evaluates exp(log_pmf(n)) for n = 0, 1, ... until the geometric bound on the
// remaining tail, p(n+1) / (1 - ratio(n+1)), drops below eps. `ratio(j)` is
// p(j+1)/p(j) and must be nonincreasing once it falls below one.
template <class LogPmf, class Ratio>
std::pair<std::vector<double>, double> truncate_tail(LogPmf log_pmf, Ratio ratio, double eps) {
  std::vector<double> pmf;
  for (std::size_t n = 0; n < kMaxSupport; ++n) {
    pmf.push_back(static_cast<double>(std::exp(log_pmf(n))));
    const long double r = ratio(n + 1);
    if (r < 1.0L) {
      const long double next = std::exp(log_pmf(n + 1));
      const long double bound = next / (1.0L - r);
      if (bound < eps) return {std::move(pmf), static_cast<double>(bound)};
    }
  }
  fail(ErrorKind::invalid_parameter, "photon-number support exceeds the supported size");
}

}  // namespace detail

inline PhotonNumberDistribution make_poisson(double mean, double eps = kDefaultTailEpsilon) {
  detail::check_mean(mean);
  detail::check_epsilon(eps);
  const std::string label = "poisson(mean=" + std::to_string(mean) + ")";
  if (mean == 0.0) return PhotonNumberDistribution({1.0}, 0.0, label);
  const long double lambda = mean;
  const long double log_lambda = std::log(lambda);
  auto [pmf, tail] = detail::truncate_tail(
      [&](std::size_t n) {
        const long double k = static_cast<long double>(n);
        return k * log_lambda - lambda - std::lgamma(k + 1.0L);
      },
      [&](std::size_t j) { return lambda / (static_cast<long double>(j) + 1.0L); }, eps);
  return PhotonNumberDistribution(std::move(pmf), tail, label);
}

inline PhotonNumberDistribution make_thermal(double mean, double eps = kDefaultTailEpsilon) {
  detail::check_mean(mean);
  detail::check_epsilon(eps);
  const std::string label = "thermal(mean=" + std::to_string(mean) + ")";
  if (mean == 0.0) return PhotonNumberDistribution({1.0}, 0.0, label);
  const long double log1p_mean = std::log1p(static_cast<long double>(mean));
  const long double log_x = std::log(static_cast<long double>(mean)) - log1p_mean;
  const long double x = std::exp(log_x);
  auto [pmf, tail] = detail::truncate_tail(
      [&](std::size_t n) { return static_cast<long double>(n) * log_x - log1p_mean; },
      [&](std::size_t) { return x; }, eps);
  return PhotonNumberDistribution(std::move(pmf), tail, label);
}

/// Negative-binomial light: `modes` independent thermal modes sharing `mean`.
inline PhotonNumberDistribution make_multimode_thermal(double mean, std::uint64_t modes,
                                                       double eps = kDefaultTailEpsilon) {
  detail::check_mean(mean);
  detail::check_epsilon(eps);
  detail::require(modes >= 1, ErrorKind::invalid_parameter, "multimode thermal light needs modes >= 1");
  if (modes == 1) return make_thermal(mean, eps);
  const std::string label =
      "multimode_thermal(mean=" + std::to_string(mean) + ", modes=" + std::to_string(modes) + ")";
  if (mean == 0.0) return PhotonNumberDistribution({1.0}, 0.0, label);
  const long double m = static_cast<long double>(modes);
  const long double per_mode = static_cast<long double>(mean) / m;
  const long double log1p_a = std::log1p(per_mode);
  const long double log_x = std::log(per_mode) - log1p_a;
  const long double x = std::exp(log_x);
  const long double lgamma_m = std::lgamma(m);
  auto [pmf, tail] = detail::truncate_tail(
      [&](std::size_t n) {
        const long double k = static_cast<long double>(n);
        return std::lgamma(k + m) - lgamma_m - std::lgamma(k + 1.0L) + k * log_x - m * log1p_a;
      },
      [&](std::size_t j) {
        const long double k = static_cast<long double>(j);
        return x * (k + m) / (k + 1.0L);
      },
      eps);
  return PhotonNumberDistribution(std::move(pmf), tail, label);
}

inline PhotonNumberDistribution make_fock(std::uint64_t n) {
  std::vector<double> pmf(n + 1, 0.0);
  pmf[n] = 1.0;
  return PhotonNumberDistribution(std::move(pmf), 0.0, "fock(n=" + std::to_string(n) + ")");
}

/// Arbitrary P_n from an unnormalized nonnegative table.
inline PhotonNumberDistribution from_pmf(std::span<const double> table) {
  detail::require(!table.empty(), ErrorKind::invalid_parameter, "empty PMF table");
  CompensatedSum<long double> total;
  for (double p : table) {
    detail::require(std::isfinite(p) && p >= 0.0, ErrorKind::invalid_parameter,
                    "PMF table entries must be finite and nonnegative");
    total += p;
  }
  const long double norm = total.value();
  detail::require(norm > 0.0L, ErrorKind::invalid_parameter, "PMF table has no positive entry");
  std::vector<double> pmf(table.size());
  std::transform(table.begin(), table.end(), pmf.begin(),
                 [norm](double p) { return static_cast<double>(p / norm); });
  // Trailing zeros carry no information; keep at least the vacuum entry.
  while (pmf.size() > 1 && pmf.back() == 0.0) pmf.pop_back();
  return PhotonNumberDistribution(std::move(pmf), 0.0, "pmf(size=" + std::to_string(table.size()) + ")");
}

/// Inverse-CDF draw over the truncated table.
inline std::uint64_t sample_n(const PhotonNumberDistribution& dist, RngStream& rng) {
  const auto cdf = dist.cdf();
  const double u = uniform01(rng) * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return dist.n_max();
  return static_cast<std::uint64_t>(it - cdf.begin());
}

}  // namespace linphot

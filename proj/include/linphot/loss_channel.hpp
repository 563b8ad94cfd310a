#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linphot/error.hpp"
#include "linphot/photon_sources.hpp"
#include "linphot/pmf.hpp"
#include "linphot/random.hpp"

namespace linphot {

/// Detected-photon distribution P_m obtained from P_n through the Bernoulli
/// channel of efficiency eta. Support is bounded by the parent's n_max.
class DetectedPhotonDistribution {
 public:
  DetectedPhotonDistribution(std::vector<double> pmf, double eta, double tail_mass, std::string source_label)
      : pmf_(std::move(pmf)), eta_(eta), tail_mass_(tail_mass), source_label_(std::move(source_label)) {
    detail::require(!pmf_.empty(), ErrorKind::invalid_parameter, "empty detected-photon PMF");
    const PmfMoments m = pmf_moments(pmf_);
    mass_ = m.mass;
    mean_ = m.mean;
    central_ = m.central;
  }

  std::span<const double> pmf() const noexcept { return pmf_; }
  double probability(std::size_t m) const noexcept { return m < pmf_.size() ? pmf_[m] : 0.0; }
  std::size_t m_max() const noexcept { return pmf_.size() - 1; }
  double mean() const noexcept { return mean_; }
  double total_mass() const noexcept { return mass_; }
  /// Central moment mu_r(m), r in [2, 5].
  double central_moment(int r) const { return central_.at(static_cast<std::size_t>(r)); }
  const std::array<double, 6>& central_moments() const noexcept { return central_; }
  /// Overall efficiency applied to the original P_n (products compose).
  double eta() const noexcept { return eta_; }
  double tail_mass() const noexcept { return tail_mass_; }
  const std::string& source_label() const noexcept { return source_label_; }

 private:
  std::vector<double> pmf_;
  double eta_ = 1.0;
  double tail_mass_ = 0.0;
  double mass_ = 0.0;
  double mean_ = 0.0;
  std::array<double, 6> central_{};
  std::string source_label_;
};

namespace detail {

inline void check_eta(double eta) {
  require(std::isfinite(eta) && eta >= 0.0 && eta <= 1.0, ErrorKind::invalid_parameter,
          "detection efficiency must lie in [0, 1], got " + std::to_string(eta));
}

inline long double sum_ascending(std::vector<long double>& terms) {
  std::sort(terms.begin(), terms.end());
  long double s = 0.0L;
  for (long double t : terms) s += t;
  return s;
}

/// Column-wise evaluation of sum_{n>=m} C(n,m) eta^m (1-eta)^(n-m) P_n.
///
/// For each m the kernel is walked outward from its peak in n with the ratio
/// t(n+1)/t(n) = (n+1)(1-eta)/(n+1-m), seeded in log space, so neither
/// factorials nor eta^m are ever formed.
inline std::vector<double> thin_pmf(std::span<const double> parent, double eta) {
  const std::size_t size = parent.size();
  std::vector<double> out(size, 0.0);
  if (eta == 1.0) {
    std::copy(parent.begin(), parent.end(), out.begin());
    return out;
  }
  std::vector<long double> terms;
  terms.reserve(size);
  if (eta == 0.0) {
    terms.assign(parent.begin(), parent.end());
    out[0] = static_cast<double>(sum_ascending(terms));
    return out;
  }
  const long double log_eta = std::log(static_cast<long double>(eta));
  const long double log_q = std::log1p(-static_cast<long double>(eta));
  const long double q = 1.0L - static_cast<long double>(eta);
  const std::size_t n_max = size - 1;
  for (std::size_t m = 0; m <= n_max; ++m) {
    const long double mm = static_cast<long double>(m);
    // t(n) increases while (n+1) eta < m.
    long double peak_real = std::ceil(mm / static_cast<long double>(eta)) - 1.0L;
    std::size_t peak = m;
    if (peak_real > mm) peak = peak_real >= static_cast<long double>(n_max) ? n_max : static_cast<std::size_t>(peak_real);
    const long double np = static_cast<long double>(peak);
    const long double log_t = std::lgamma(np + 1.0L) - std::lgamma(mm + 1.0L) - std::lgamma(np - mm + 1.0L) +
                              mm * log_eta + (np - mm) * log_q;
    terms.clear();
    const long double t_peak = std::exp(log_t);
    long double t = t_peak;
    for (std::size_t n = peak; n <= n_max; ++n) {
      if (parent[n] != 0.0) terms.push_back(t * parent[n]);
      const long double nn = static_cast<long double>(n);
      t *= (nn + 1.0L) * q / (nn + 1.0L - mm);
      if (t == 0.0L) break;
    }
    t = t_peak;
    for (std::size_t n = peak; n > m; --n) {
      const long double nn = static_cast<long double>(n);
      t *= (nn - mm) / (nn * q);
      if (t == 0.0L) break;
      if (parent[n - 1] != 0.0) terms.push_back(t * parent[n - 1]);
    }
    out[m] = static_cast<double>(sum_ascending(terms));
  }
  return out;
}

}  // namespace detail

inline DetectedPhotonDistribution apply_bernoulli(const PhotonNumberDistribution& source, double eta) {
  detail::check_eta(eta);
  return DetectedPhotonDistribution(detail::thin_pmf(source.pmf(), eta), eta, source.tail_mass(),
                                    source.label());
}

/// Further losses on an already detected distribution; efficiencies multiply.
inline DetectedPhotonDistribution apply_bernoulli(const DetectedPhotonDistribution& detected, double eta) {
  detail::check_eta(eta);
  return DetectedPhotonDistribution(detail::thin_pmf(detected.pmf(), eta), detected.eta() * eta,
                                    detected.tail_mass(), detected.source_label());
}

/// Binomial thinning of a known photon number.
inline std::uint64_t thin(std::uint64_t n, double eta, RngStream& rng) {
  if (eta == 0.0 || n == 0) return 0;
  if (eta == 1.0) return n;
  std::binomial_distribution<std::uint64_t> binom(n, eta);
  return binom(rng);
}

/// One detected count: draw n from the source, then thin with efficiency eta.
inline std::uint64_t sample_m(const PhotonNumberDistribution& source, double eta, RngStream& rng) {
  detail::check_eta(eta);
  return thin(sample_n(source, rng), eta, rng);
}

/// mu_2(m)/<m>; equals eta*Q + 1 for the parent's Mandel Q.
inline double detected_fano(const DetectedPhotonDistribution& dist) {
  detail::require(dist.mean() > 0.0, ErrorKind::undefined_statistic,
                  "detected Fano factor is undefined for <m> = 0");
  return dist.central_moment(2) / dist.mean();
}

}  // namespace linphot

#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "linphot/summation.hpp"

namespace linphot {

/// Zeroth moment (total mass), mean and central moments mu_2..mu_5 of a
/// possibly sub-normalized PMF over 0, 1, 2, ...
struct PmfMoments {
  double mass = 0.0;
  double mean = 0.0;
  std::array<double, 6> central{};  // index r; [0] and [1] unused
};

inline PmfMoments pmf_moments(std::span<const double> pmf) {
  CompensatedSum<long double> mass, first;
  for (std::size_t n = 0; n < pmf.size(); ++n) {
    mass += pmf[n];
    first += static_cast<long double>(n) * pmf[n];
  }
  const long double mean = first.value();
  std::array<CompensatedSum<long double>, 6> acc;
  for (std::size_t n = 0; n < pmf.size(); ++n) {
    if (pmf[n] == 0.0) continue;
    const long double d = static_cast<long double>(n) - mean;
    long double term = pmf[n] * d;
    for (int r = 2; r <= 5; ++r) {
      term *= d;
      acc[r] += term;
    }
  }
  PmfMoments out;
  out.mass = static_cast<double>(mass.value());
  out.mean = static_cast<double>(mean);
  for (int r = 2; r <= 5; ++r) out.central[r] = static_cast<double>(acc[r].value());
  return out;
}

}  // namespace linphot

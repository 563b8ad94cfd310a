#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "linphot/linphot.hpp"

namespace testing_support {

/// Polynomial with integer coefficients in kappa_1..kappa_5. A monomial is
/// the exponent vector (e1, ..., e5).
struct Poly {
  using Monomial = std::array<int, 5>;
  std::map<Monomial, long long> terms;

  static Poly variable(int r) {
    Poly p;
    Monomial m{};
    m[r - 1] = 1;
    p.terms[m] = 1;
    return p;
  }
  static Poly constant(long long c) {
    Poly p;
    if (c != 0) p.terms[Monomial{}] = c;
    return p;
  }
  void prune() {
    for (auto it = terms.begin(); it != terms.end();) it = it->second == 0 ? terms.erase(it) : std::next(it);
  }
  friend Poly operator+(Poly a, const Poly& b) {
    for (const auto& [m, c] : b.terms) a.terms[m] += c;
    a.prune();
    return a;
  }
  friend Poly operator-(Poly a, const Poly& b) {
    for (const auto& [m, c] : b.terms) a.terms[m] -= c;
    a.prune();
    return a;
  }
  friend Poly operator*(const Poly& a, const Poly& b) {
    Poly out;
    for (const auto& [ma, ca] : a.terms) {
      for (const auto& [mb, cb] : b.terms) {
        Monomial m{};
        for (int i = 0; i < 5; ++i) m[i] = ma[i] + mb[i];
        out.terms[m] += ca * cb;
      }
    }
    out.prune();
    return out;
  }
  friend Poly operator*(long long k, const Poly& a) { return Poly::constant(k) * a; }
  bool operator==(const Poly&) const = default;
};

/// The raw-moment polynomials mu'_1..mu'_5 in terms of cumulants, written
/// out term by term.
inline std::array<Poly, 6> printed_raw_moment_polynomials() {
  auto mono = [](long long c, std::array<int, 5> e) {
    Poly p;
    p.terms[e] = c;
    return p;
  };
  std::array<Poly, 6> mu;
  mu[1] = mono(1, {1, 0, 0, 0, 0});
  mu[2] = mono(1, {0, 1, 0, 0, 0}) + mono(1, {2, 0, 0, 0, 0});
  mu[3] = mono(1, {0, 0, 1, 0, 0}) + mono(3, {1, 1, 0, 0, 0}) + mono(1, {3, 0, 0, 0, 0});
  mu[4] = mono(1, {0, 0, 0, 1, 0}) + mono(4, {1, 0, 1, 0, 0}) + mono(3, {0, 2, 0, 0, 0}) + mono(6, {2, 1, 0, 0, 0}) +
          mono(1, {4, 0, 0, 0, 0});
  mu[5] = mono(1, {0, 0, 0, 0, 1}) + mono(5, {1, 0, 0, 1, 0}) + mono(10, {0, 1, 1, 0, 0}) +
          mono(10, {2, 0, 1, 0, 0}) + mono(15, {1, 2, 0, 0, 0}) + mono(10, {3, 1, 0, 0, 0}) +
          mono(1, {5, 0, 0, 0, 0});
  return mu;
}

/// Evaluate a polynomial at numeric cumulants.
inline long double evaluate(const Poly& p, const std::array<double, 6>& kappa) {
  long double s = 0.0L;
  for (const auto& [m, c] : p.terms) {
    long double t = static_cast<long double>(c);
    for (int i = 0; i < 5; ++i) t *= std::pow(static_cast<long double>(kappa[i + 1]), m[i]);
    s += t;
  }
  return s;
}

/// Deterministic generator for property tests.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::uint64_t integer(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  }
  linphot::PhotonNumberDistribution source() {
    switch (integer(0, 4)) {
      case 0: return linphot::make_poisson(uniform(0.5, 60.0));
      case 1: return linphot::make_thermal(uniform(0.5, 20.0));
      case 2: return linphot::make_multimode_thermal(uniform(1.0, 40.0), integer(2, 8));
      case 3: return linphot::make_fock(integer(1, 60));
      default: {
        std::vector<double> t(integer(2, 30));
        for (auto& x : t) x = uniform(0.0, 1.0);
        return linphot::from_pmf(t);
      }
    }
  }
};

/// Upper 0.001 quantile of chi-square with `dof` degrees of freedom
/// (Wilson-Hilferty).
inline double chi2_critical_001(double dof) {
  const double z = 3.090232306167813;
  const double a = 2.0 / (9.0 * dof);
  return dof * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

inline double rel_diff(double a, double b) {
  const double s = std::max(std::fabs(a), std::fabs(b));
  return s == 0.0 ? 0.0 : std::fabs(a - b) / s;
}

/// Direct double sum of the Bernoulli kernel with exact binomials; only
/// usable for small supports.
inline std::vector<long double> brute_force_thinning(std::span<const double> pn, double eta) {
  std::vector<long double> pm(pn.size(), 0.0L);
  for (std::size_t n = 0; n < pn.size(); ++n) {
    long double c = 1.0L;  // C(n, m)
    for (std::size_t m = 0; m <= n; ++m) {
      pm[m] += c * std::pow(static_cast<long double>(eta), static_cast<long double>(m)) *
               std::pow(1.0L - eta, static_cast<long double>(n - m)) * pn[n];
      c = c * static_cast<long double>(n - m) / static_cast<long double>(m + 1);
    }
  }
  return pm;
}

}  // namespace testing_support

#define EXPECT_LINPHOT_ERROR(stmt, error_kind)                                  \
  do {                                                                          \
    try {                                                                       \
      (void)(stmt);                                                             \
      ADD_FAILURE() << "expected " << linphot::to_string(error_kind);           \
    } catch (const linphot::Error& e) {                                         \
      EXPECT_EQ(e.kind(), error_kind) << e.what();                              \
    }                                                                           \
  } while (0)

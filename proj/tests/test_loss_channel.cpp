#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace linphot;
using testing_support::Gen;

namespace {

void expect_pmf_near(const DetectedPhotonDistribution& a, std::span<const double> b, double tol) {
  const std::size_t n = std::max(a.pmf().size(), b.size());
  for (std::size_t m = 0; m < n; ++m) {
    const double pb = m < b.size() ? b[m] : 0.0;
    ASSERT_NEAR(a.probability(m), pb, tol) << "m=" << m;
  }
}

}  // namespace

TEST(ApplyBernoulli, SinglePhotonHalfEfficiency) {
  const auto d = apply_bernoulli(make_fock(1), 0.5);
  EXPECT_DOUBLE_EQ(d.probability(0), 0.5);
  EXPECT_DOUBLE_EQ(d.probability(1), 0.5);
}

TEST(ApplyBernoulli, PoissonClosure) {
  expect_pmf_near(apply_bernoulli(make_poisson(50.0), 0.2), make_poisson(10.0).pmf(), 1e-10);
}

TEST(ApplyBernoulli, ThermalClosure) {
  expect_pmf_near(apply_bernoulli(make_thermal(10.0), 0.3), make_thermal(3.0).pmf(), 1e-10);
}

TEST(ApplyBernoulli, MatchesBruteForceKernel) {
  Gen g(21);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> t(g.integer(1, 40));
    for (auto& x : t) x = g.uniform(0.0, 1.0);
    const auto src = from_pmf(t);
    const double eta = g.uniform(0.0, 1.0);
    const auto brute = testing_support::brute_force_thinning(src.pmf(), eta);
    const auto d = apply_bernoulli(src, eta);
    for (std::size_t m = 0; m < brute.size(); ++m) ASSERT_NEAR(d.probability(m), static_cast<double>(brute[m]), 1e-14);
  }
}

TEST(ApplyBernoulli, RejectsEtaOutsideUnitInterval) {
  const auto src = make_poisson(3.0);
  EXPECT_LINPHOT_ERROR(apply_bernoulli(src, -0.1), ErrorKind::invalid_parameter);
  EXPECT_LINPHOT_ERROR(apply_bernoulli(src, 1.5), ErrorKind::invalid_parameter);
  EXPECT_LINPHOT_ERROR(apply_bernoulli(src, std::nan("")), ErrorKind::invalid_parameter);
}

TEST(ApplyBernoulli, UnitEfficiencyIsIdentity) {
  Gen g(22);
  for (int i = 0; i < 50; ++i) {
    const auto src = g.source();
    const auto d = apply_bernoulli(src, 1.0);
    ASSERT_EQ(d.pmf().size(), src.pmf().size());
    for (std::size_t m = 0; m < d.pmf().size(); ++m) EXPECT_EQ(d.probability(m), src.probability(m));
  }
}

TEST(ApplyBernoulli, SupportInheritsParent) {
  const auto src = make_thermal(8.0);
  EXPECT_EQ(apply_bernoulli(src, 0.4).m_max(), src.n_max());
}

TEST(ApplyBernoulli, CompositionProperty) {
  Gen g(23);
  for (int i = 0; i < 100; ++i) {
    const auto src = g.source();
    const double e1 = g.uniform(0.0, 1.0), e2 = g.uniform(0.0, 1.0);
    const auto twice = apply_bernoulli(apply_bernoulli(src, e1), e2);
    const auto once = apply_bernoulli(src, e1 * e2);
    EXPECT_DOUBLE_EQ(twice.eta(), e1 * e2);
    expect_pmf_near(twice, once.pmf(), 1e-10);
  }
}

TEST(ApplyBernoulli, MeanAndFanoIdentityGrid) {
  const std::vector<PhotonNumberDistribution> sources{make_poisson(40.0), make_thermal(12.0),
                                                      make_multimode_thermal(30.0, 5), make_fock(25)};
  for (const auto& src : sources) {
    for (double eta : {0.05, 0.1, 0.3, 0.5, 0.8, 1.0}) {
      const auto d = apply_bernoulli(src, eta);
      EXPECT_LE(testing_support::rel_diff(d.mean(), eta * src.mean()), 1e-10) << src.label() << " eta=" << eta;
      EXPECT_LE(testing_support::rel_diff(detected_fano(d), eta * *src.mandel_q() + 1.0), 1e-9)
          << src.label() << " eta=" << eta;
    }
  }
}

TEST(ApplyBernoulli, RandomFanoIdentity) {
  Gen g(24);
  for (int i = 0; i < 200; ++i) {
    const auto src = g.source();
    const double eta = g.uniform(0.01, 1.0);
    const auto d = apply_bernoulli(src, eta);
    EXPECT_LE(testing_support::rel_diff(detected_fano(d), eta * *src.mandel_q() + 1.0), 1e-9) << src.label();
  }
}

TEST(DetectedFano, Examples) {
  for (double eta : {0.1, 0.5, 0.9}) EXPECT_NEAR(detected_fano(apply_bernoulli(make_poisson(30.0), eta)), 1.0, 1e-9);
  EXPECT_NEAR(detected_fano(apply_bernoulli(make_thermal(10.0), 0.3)), 4.0, 1e-8);
  EXPECT_NEAR(detected_fano(apply_bernoulli(make_fock(5), 0.5)), 0.5, 1e-9);
  EXPECT_LINPHOT_ERROR(detected_fano(apply_bernoulli(make_fock(5), 0.0)), ErrorKind::undefined_statistic);
}

TEST(SampleM, DegenerateEfficiencies) {
  const auto src = make_poisson(20.0);
  auto a = make_stream(5, 0), b = make_stream(5, 0);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_m(src, 0.0, a), 0u);
  a = make_stream(6, 0);
  b = make_stream(6, 0);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_m(src, 1.0, a), sample_n(src, b));
}

TEST(SampleM, FockBinomialMean) {
  const auto src = make_fock(100);
  auto rng = make_stream(7, 0);
  const int n = 1000000;
  long double s = 0;
  for (int i = 0; i < n; ++i) s += sample_m(src, 0.25, rng);
  EXPECT_NEAR(static_cast<double>(s / n), 25.0, 5.0 * std::sqrt(18.75 / n));
}

TEST(SampleM, ChiSquareAgainstAnalyticPmf) {
  const auto src = make_thermal(20.0);
  const auto d = apply_bernoulli(src, 0.4);
  auto rng = make_stream(8, 0);
  const int n = 1000000;
  std::vector<long> counts(d.pmf().size(), 0);
  for (int i = 0; i < n; ++i) ++counts[sample_m(src, 0.4, rng)];
  double chi2 = 0.0;
  int bins = 0;
  for (std::size_t m = 0; m < counts.size(); ++m) {
    const double e = d.probability(m) * n;
    if (e < 100) continue;
    chi2 += (counts[m] - e) * (counts[m] - e) / e;
    ++bins;
  }
  ASSERT_GT(bins, 10);
  EXPECT_LT(chi2, testing_support::chi2_critical_001(bins - 1));
}

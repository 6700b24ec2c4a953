#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "sdid/rng.hpp"
#include "sdid/stats.hpp"
#include "support/oracles.hpp"

using sdid::CounterRng;
using sdid::Philox4x32;

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswerVectors) {
  EXPECT_EQ(Philox4x32::encrypt({0, 0, 0, 0}, {0, 0}),
            (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::encrypt({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::encrypt({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterRng, SameKeySameStream) {
  CounterRng a(42, sdid::StreamDomain::errors, 7);
  CounterRng b(42, sdid::StreamDomain::errors, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(CounterRng, StreamsSubstreamsAndSeedsDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed : {0ull, 1ull})
    for (std::uint64_t s : {0ull, 1ull, 1ull << 40})
      for (std::uint32_t sub : {0u, 1u}) firsts.insert(CounterRng(seed, s, sub).next_u64());
  EXPECT_EQ(firsts.size(), 12u);
}

TEST(CounterRng, UniformIndexIsInRangeAndBalanced) {
  CounterRng rng(3, 0);
  const std::uint32_t n = 7;
  std::vector<int> counts(n, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const auto k = rng.uniform_index(n);
    ASSERT_LT(k, n);
    ++counts[k];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += std::pow(c - draws / 7.0, 2) / (draws / 7.0);
  EXPECT_LT(chi2, 22.46);  // 0.999 quantile of chi-square(6)
}

TEST(CounterRng, NormalMoments) {
  CounterRng rng(11, 5);
  const int n = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.015);
  EXPECT_NEAR(s4 / n, 3.0, 0.06);
}

TEST(CounterRng, PoissonMeanAndVarianceBothRegimes) {
  for (double mean : {3.5, 670.0}) {
    CounterRng rng(5, static_cast<std::uint64_t>(mean));
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<double>(rng.poisson(mean));
      s += k;
      s2 += k * k;
    }
    const double m = s / n;
    const double v = s2 / n - m * m;
    EXPECT_NEAR(m, mean, 4.0 * std::sqrt(mean / n)) << mean;
    EXPECT_NEAR(v / mean, 1.0, 0.03) << mean;
  }
}

TEST(CounterRng, UniformStaysInHalfOpenInterval) {
  CounterRng rng(9, 9);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

// Reference values computed offline with an independent statistics package.
TEST(Stats, TwoSidedPValuesMatchReferenceValues) {
  EXPECT_NEAR(sdid::stats::t_two_sided_p(2.131, 15), 0.05004250477424243, 1e-12);
  EXPECT_NEAR(sdid::stats::t_two_sided_p(1.0, 3), 0.39100221895577053, 1e-12);
  EXPECT_NEAR(sdid::stats::t_two_sided_p(-3.5, 36), 0.001258973827590868, 1e-12);
  EXPECT_NEAR(sdid::stats::normal_two_sided_p(2.131), 0.033089142183101265, 1e-12);
}

TEST(Stats, TPValueAgreesWithQuadrature) {
  for (double df : {2.0, 5.0, 15.0, 37.0})
    for (double t : {0.1, 0.9, 2.0, 4.5})
      EXPECT_NEAR(sdid::stats::t_two_sided_p(t, df), oracle::t_two_sided_p(t, df), 1e-8) << t << " " << df;
}

TEST(Stats, TTailIsHeavierThanNormal) {
  for (double z : {0.5, 1.5, 2.5, 4.0})
    EXPECT_GT(sdid::stats::t_two_sided_p(z, 15), sdid::stats::normal_two_sided_p(z));
}

TEST(Stats, Type7Quantile) {
  const std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6};
  EXPECT_DOUBLE_EQ(sdid::stats::quantile(x, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(sdid::stats::quantile(x, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(sdid::stats::quantile(x, 0.5), 3.5);
  EXPECT_NEAR(sdid::stats::quantile(x, 0.9), 6.9, 1e-12);
  EXPECT_DOUBLE_EQ(sdid::stats::quantile(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sdid::stats::quantile(x, 1.0), 9.0);
}

TEST(Stats, VarianceDdof) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(sdid::stats::variance(x, 1), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(sdid::stats::variance(x, 0), 1.25);
}

TEST(Stats, WindowedKdeMatchesFullSum) {
  CounterRng rng(1, 1);
  std::vector<double> x(5000);
  for (auto& v : x) v = rng.normal();
  std::sort(x.begin(), x.end());
  const double h = sdid::stats::silverman_bandwidth_sorted(x);
  for (double at : {-2.0, 0.0, 0.7, 3.0})
    EXPECT_NEAR(sdid::stats::gaussian_kde_sorted(x, at, h), sdid::stats::gaussian_kde(x, at, h), 1e-15);
}

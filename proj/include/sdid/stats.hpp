#ifndef SDID_STATS_HPP
#define SDID_STATS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "sdid/error.hpp"

namespace sdid::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Two-sided p-value of a z statistic.
inline double normal_two_sided_p(double z) {
  if (std::isinf(z)) return 0.0;
  return std::erfc(std::fabs(z) / std::numbers::sqrt2);
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
inline double t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw Error(Errc::invalid_argument, "t distribution needs df > 0");
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double sum = 0.0;
  for (double v : x) sum += v;
  return sum / static_cast<double>(x.size());
}

/// Variance with denominator n - ddof.
inline double variance(std::span<const double> x, int ddof = 1) {
  const auto n = static_cast<double>(x.size());
  if (n - ddof <= 0.0) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / (n - ddof);
}

inline double stddev(std::span<const double> x, int ddof = 1) {
  return std::sqrt(variance(x, ddof));
}

/// Linear-interpolation empirical quantile (Hyndman-Fan type 7) of an
/// already sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw Error(Errc::invalid_argument, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> x, double prob) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, prob);
}

/// Silverman's rule of thumb: 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
inline double silverman_bandwidth_sorted(std::span<const double> sorted) {
  const double sd = stddev(sorted);
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(static_cast<double>(sorted.size()), -0.2);
}

/// Gaussian kernel density estimate at `at`.
inline double gaussian_kde(std::span<const double> x, double at, double bandwidth) {
  if (x.empty() || !(bandwidth > 0.0)) return 0.0;
  const double inv_h = 1.0 / bandwidth;
  double sum = 0.0;
  for (double v : x) {
    const double z = (v - at) * inv_h;
    sum += std::exp(-0.5 * z * z);
  }
  return sum * inv_h / (static_cast<double>(x.size()) * std::sqrt(2.0 * std::numbers::pi));
}

/// Same estimate on a sorted sample, skipping points beyond 9 bandwidths
/// (their kernel weight is below 3e-18).
inline double gaussian_kde_sorted(std::span<const double> sorted, double at, double bandwidth) {
  if (sorted.empty() || !(bandwidth > 0.0)) return 0.0;
  const auto lo = std::lower_bound(sorted.begin(), sorted.end(), at - 9.0 * bandwidth);
  const auto hi = std::upper_bound(lo, sorted.end(), at + 9.0 * bandwidth);
  const double inv_h = 1.0 / bandwidth;
  double sum = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (*it - at) * inv_h;
    sum += std::exp(-0.5 * z * z);
  }
  return sum * inv_h / (static_cast<double>(sorted.size()) * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace sdid::stats

#endif  // SDID_STATS_HPP

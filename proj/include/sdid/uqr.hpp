#ifndef SDID_UQR_HPP
#define SDID_UQR_HPP

// Unconditional quantile DiD through the recentered influence function
//   RIF(y; q) = q + (kappa - 1{y <= q}) / f(q)
// regressed on D with unit and period dummies and record covariates.
//
// Records enter unweighted. Because RIF = c - 1{y <= q} / f with c constant,
// the design Gram matrix does not depend on kappa; each cell keeps its
// outcomes sorted with cumulative covariate sums, so X' 1{y <= q} costs one
// binary search per cell.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdid/error.hpp"
#include "sdid/panel.hpp"
#include "sdid/parallel.hpp"
#include "sdid/regression.hpp"
#include "sdid/rng.hpp"
#include "sdid/stats.hpp"

namespace sdid {

struct RifSpec {
  double kappa = 0.5;
  double quantile = 0.0;
  double density = 0.0;
  double bandwidth = 0.0;

  double operator()(double y) const { return quantile + (kappa - (y <= quantile ? 1.0 : 0.0)) / density; }
};

namespace detail {

inline RifSpec rif_spec_sorted(std::span<const double> sorted, double kappa,
                               std::optional<double> bandwidth) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw Error(Errc::invalid_argument, "kappa must be in (0,1)");
  if (sorted.size() < 30) throw Error(Errc::invalid_argument, "RIF needs at least 30 observations");
  RifSpec s;
  s.kappa = kappa;
  s.quantile = stats::quantile_sorted(sorted, kappa);
  s.bandwidth = bandwidth.value_or(stats::silverman_bandwidth_sorted(sorted));
  if (!(s.bandwidth > 0.0)) throw Error(Errc::degenerate_density, "bandwidth is zero; sample has no spread");
  s.density = stats::gaussian_kde_sorted(sorted, s.quantile, s.bandwidth);
  if (!(s.density >= 1e-12))
    throw Error(Errc::degenerate_density,
                "density at the quantile is below 1e-12; try a wider bandwidth");
  return s;
}

}  // namespace detail

/// Type-7 quantile, Gaussian KDE (Silverman bandwidth unless given) and the
/// RIF of every observation.
inline std::pair<RifSpec, std::vector<double>> rif_transform(const std::vector<double>& y, double kappa,
                                                             std::optional<double> bandwidth = {}) {
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const RifSpec spec = detail::rif_spec_sorted(sorted, kappa, bandwidth);
  std::vector<double> out;
  out.reserve(y.size());
  for (double v : y) out.push_back(spec(v));
  return {spec, std::move(out)};
}

enum class UqrSeMode { bootstrap, crve, hc2 };
enum class GridMode { kappa, threshold };

inline const char* to_string(UqrSeMode m) {
  switch (m) {
    case UqrSeMode::bootstrap: return "BOOTSTRAP";
    case UqrSeMode::crve: return "CRVE";
    case UqrSeMode::hc2: return "HC2";
  }
  return "?";
}

struct UqrOptions {
  UqrSeMode se_mode = UqrSeMode::bootstrap;
  int replications = 50;
  std::uint64_t seed = 0;
  std::uint64_t stream = stream_id(StreamDomain::uqr_bootstrap, 0);
  int workers = 1;
  int max_retries = 1000;
  std::optional<double> bandwidth;
};

struct QuantileEffectCurve {
  GridMode grid_mode = GridMode::kappa;
  std::vector<double> grid;       // kappa or threshold values, strictly increasing
  std::vector<double> kappa;
  std::vector<double> threshold;  // q_kappa on the full sample in kappa mode
  std::vector<double> tau;
  std::vector<double> se;
  std::vector<RifSpec> rif;
  UqrSeMode se_mode = UqrSeMode::bootstrap;
  int replications = 0;
};

/// 0.05, 0.06, ..., 0.99.
inline std::vector<double> default_kappa_grid() {
  std::vector<double> g;
  for (int i = 5; i <= 99; ++i) g.push_back(i / 100.0);
  return g;
}

namespace detail {

struct UqrCell {
  std::vector<double> sorted_y;
  std::vector<double> sorted_x;  // record-major covariates in sorted order
  Matrix cum_x;                  // (m+1) x K prefix sums of covariates
  Matrix cross_x;                // K x K
  std::size_t size() const { return sorted_y.size(); }
};

class UqrData {
 public:
  explicit UqrData(const MicroPanel& micro)
      : n_units_(micro.n_units()),
        n_periods_(micro.n_periods()),
        n_pre_(micro.n_pre()),
        k_(micro.n_covariates()),
        unit_names_(micro.units()),
        times_(micro.times()),
        cov_names_(micro.covariate_names()) {
    const auto k = static_cast<Eigen::Index>(k_);
    for (std::size_t u = 0; u < n_units_; ++u) {
      for (std::size_t t = 0; t < n_periods_; ++t) {
        const MicroCell& src = micro.cell(u, t);
        const std::size_t m = src.size();
        std::vector<std::size_t> order(m);
        for (std::size_t i = 0; i < m; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return src.outcomes[a] < src.outcomes[b]; });
        UqrCell c;
        c.cum_x = Matrix::Zero(static_cast<Eigen::Index>(m) + 1, k);
        c.cross_x = Matrix::Zero(k, k);
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t r = order[i];
          c.sorted_y.push_back(src.outcomes[r]);
          Eigen::Map<const Vector> x(src.covariates.data() + r * k_, k);
          c.sorted_x.insert(c.sorted_x.end(), x.data(), x.data() + k);
          c.cum_x.row(static_cast<Eigen::Index>(i) + 1) = c.cum_x.row(static_cast<Eigen::Index>(i)) + x.transpose();
          c.cross_x.noalias() += x * x.transpose();
        }
        cells_.push_back(std::move(c));
      }
    }
  }

  std::size_t n_units() const { return n_units_; }
  std::size_t n_periods() const { return n_periods_; }
  std::size_t n_pre() const { return n_pre_; }
  std::size_t n_covariates() const { return k_; }
  const UqrCell& cell(std::size_t u, std::size_t t) const { return cells_[u * n_periods_ + t]; }
  const std::string& unit_name(std::size_t u) const { return unit_names_[u]; }
  int time(std::size_t t) const { return times_[t]; }
  const std::vector<std::string>& covariate_names() const { return cov_names_; }

 private:
  std::size_t n_units_, n_periods_, n_pre_, k_;
  std::vector<std::string> unit_names_;
  std::vector<int> times_;
  std::vector<std::string> cov_names_;
  std::vector<UqrCell> cells_;
};

// Design of a sample of unit clusters (copies allowed, each with its own
// dummy). Columns: intercept, cluster dummies 1..M-1, period dummies
// 1..T-1, D, covariates.
class UqrFit {
 public:
  UqrFit(const UqrData& data, std::vector<std::size_t> clusters, std::optional<double> bandwidth)
      : data_(data), clusters_(std::move(clusters)), bandwidth_(bandwidth) {
    const std::size_t m = clusters_.size();
    t_ = data.n_periods();
    k_ = data.n_covariates();
    d_col_ = static_cast<Eigen::Index>(m + t_ - 1);
    p_ = d_col_ + 1 + static_cast<Eigen::Index>(k_);
    Matrix xtx = Matrix::Zero(p_, p_);
    xt1_ = Vector::Zero(p_);
    std::size_t n = 0;
    for (std::size_t s = 0; s < m; ++s) {
      for (std::size_t t = 0; t < t_; ++t) {
        const UqrCell& c = cell(s, t);
        const auto idx = fixed_columns(s, t);
        const auto nc = static_cast<double>(c.size());
        const Vector sx = c.cum_x.row(c.cum_x.rows() - 1).transpose();
        for (auto a : idx) {
          xt1_[a] += nc;
          for (auto b : idx) xtx(a, b) += nc;
          xtx.block(a, cov_col(), 1, kk()) += sx.transpose();
          xtx.block(cov_col(), a, kk(), 1) += sx;
        }
        xt1_.tail(kk()) += sx;
        xtx.bottomRightCorner(kk(), kk()) += c.cross_x;
        pooled_.insert(pooled_.end(), c.sorted_y.begin(), c.sorted_y.end());
        n += c.size();
      }
    }
    n_ = n;
    std::sort(pooled_.begin(), pooled_.end());
    // Names collinear columns if the design is singular.
    regression::least_squares(xtx, Vector::Zero(p_), column_names());
    inv_ = xtx.ldlt().solve(Matrix::Identity(p_, p_));
  }

  const std::vector<double>& pooled_sorted() const { return pooled_; }
  std::size_t n_records() const { return n_; }

  struct Point {
    RifSpec rif;
    double tau = 0.0;
    Vector beta;
  };

  Point fit(double kappa) const {
    Point out;
    out.rif = rif_spec_sorted(pooled_, kappa, bandwidth_);
    const Vector s = indicator_moments(out.rif.quantile);
    const double c = out.rif.quantile + kappa / out.rif.density;
    out.beta = inv_ * (c * xt1_ - s / out.rif.density);
    out.tau = out.beta[d_col_];
    return out;
  }

  /// Cluster-robust SE of tau, CR1 with k = non-dummy columns.
  double crve_se(const Point& pt) const {
    const Vector a = inv_.col(d_col_);
    const double f = pt.rif.density;
    const double c = pt.rif.quantile + pt.rif.kappa / f;
    const Vector gamma = pt.beta.tail(kk());
    double meat = 0.0;
    for (std::size_t s = 0; s < clusters_.size(); ++s) {
      Vector score = Vector::Zero(p_);
      for (std::size_t t = 0; t < t_; ++t) {
        const UqrCell& cl = cell(s, t);
        const auto idx = fixed_columns(s, t);
        const auto nc = static_cast<double>(cl.size());
        const Vector sx = cl.cum_x.row(cl.cum_x.rows() - 1).transpose();
        const auto below = count_below(cl, pt.rif.quantile);
        double fb = 0.0;
        for (auto col : idx) fb += pt.beta[col];
        // sum_i x_i (c - 1{y_i <= q}/f - x_i' beta)
        const double fixed_part = c * nc - static_cast<double>(below) / f - (nc * fb + sx.dot(gamma));
        for (auto col : idx) score[col] += fixed_part;
        score.tail(kk()) += c * sx - cl.cum_x.row(static_cast<Eigen::Index>(below)).transpose() / f -
                            (sx * fb + cl.cross_x * gamma);
      }
      const double z = a.dot(score);
      meat += z * z;
    }
    const auto g = static_cast<double>(clusters_.size());
    const auto n = static_cast<double>(n_);
    const auto k = static_cast<double>(t_ + 1 + k_);
    return std::sqrt(g / (g - 1.0) * (n - 1.0) / (n - k) * meat);
  }

  /// HC2: leverage-adjusted heteroskedasticity-robust SE of tau.
  double hc2_se(const Point& pt) const {
    if (leverage_weight_.empty()) prepare_hc2();
    const double f = pt.rif.density;
    const double c = pt.rif.quantile + pt.rif.kappa / f;
    const Vector gamma = pt.beta.tail(kk());
    double total = 0.0;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < clusters_.size(); ++s) {
      for (std::size_t t = 0; t < t_; ++t) {
        const UqrCell& cl = cell(s, t);
        double fb = 0.0;
        for (auto col : fixed_columns(s, t)) fb += pt.beta[col];
        const auto below = count_below(cl, pt.rif.quantile);
        for (std::size_t i = 0; i < cl.size(); ++i, ++pos) {
          Eigen::Map<const Vector> x(cl.sorted_x.data() + i * k_, kk());
          const double e = c - (i < below ? 1.0 / f : 0.0) - fb - x.dot(gamma);
          total += leverage_weight_[pos] * e * e;
        }
      }
    }
    return std::sqrt(total);
  }

 private:
  const UqrCell& cell(std::size_t slot, std::size_t t) const { return data_.cell(clusters_[slot], t); }
  Eigen::Index cov_col() const { return d_col_ + 1; }
  Eigen::Index kk() const { return static_cast<Eigen::Index>(k_); }

  std::vector<Eigen::Index> fixed_columns(std::size_t slot, std::size_t t) const {
    std::vector<Eigen::Index> idx{0};
    if (slot > 0) idx.push_back(static_cast<Eigen::Index>(slot));
    if (t > 0) idx.push_back(static_cast<Eigen::Index>(clusters_.size() - 1 + t));
    if (clusters_[slot] == 0 && t >= data_.n_pre()) idx.push_back(d_col_);
    return idx;
  }

  static std::size_t count_below(const UqrCell& c, double q) {
    return static_cast<std::size_t>(std::upper_bound(c.sorted_y.begin(), c.sorted_y.end(), q) -
                                    c.sorted_y.begin());
  }

  // X' 1{y <= q}
  Vector indicator_moments(double q) const {
    Vector s = Vector::Zero(p_);
    for (std::size_t slot = 0; slot < clusters_.size(); ++slot) {
      for (std::size_t t = 0; t < t_; ++t) {
        const UqrCell& c = cell(slot, t);
        const std::size_t below = count_below(c, q);
        for (auto col : fixed_columns(slot, t)) s[col] += static_cast<double>(below);
        s.tail(kk()) += c.cum_x.row(static_cast<Eigen::Index>(below)).transpose();
      }
    }
    return s;
  }

  void prepare_hc2() const {
    const Vector a = inv_.col(d_col_);
    leverage_weight_.reserve(n_);
    Vector x = Vector::Zero(p_);
    for (std::size_t s = 0; s < clusters_.size(); ++s) {
      for (std::size_t t = 0; t < t_; ++t) {
        const UqrCell& cl = cell(s, t);
        const auto idx = fixed_columns(s, t);
        for (std::size_t i = 0; i < cl.size(); ++i) {
          x.setZero();
          for (auto col : idx) x[col] = 1.0;
          x.tail(kk()) = Eigen::Map<const Vector>(cl.sorted_x.data() + i * k_, kk());
          const double h = x.dot(inv_ * x);
          if (!(1.0 - h > 1e-10))
            throw Error(Errc::singular_gram, "HC2 undefined: a record has leverage 1");
          const double ax = a.dot(x);
          leverage_weight_.push_back(ax * ax / (1.0 - h));
        }
      }
    }
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names{"(intercept)"};
    for (std::size_t s = 1; s < clusters_.size(); ++s)
      names.push_back("unit:" + data_.unit_name(clusters_[s]) + "#" + std::to_string(s));
    for (std::size_t t = 1; t < t_; ++t) names.push_back("time:" + std::to_string(data_.time(t)));
    names.push_back("D");
    for (const auto& c : data_.covariate_names()) names.push_back(c);
    return names;
  }

  const UqrData& data_;
  std::vector<std::size_t> clusters_;
  std::optional<double> bandwidth_;
  std::size_t t_ = 0, k_ = 0, n_ = 0;
  Eigen::Index d_col_ = 0, p_ = 0;
  Vector xt1_;
  Matrix inv_;
  std::vector<double> pooled_;
  mutable std::vector<double> leverage_weight_;
};

inline std::vector<std::size_t> identity_clusters(std::size_t n) {
  std::vector<std::size_t> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = i;
  return c;
}

}  // namespace detail

/// Maps outcome thresholds to kappa through the pooled empirical CDF.
inline std::vector<double> kappas_from_thresholds(const MicroPanel& micro,
                                                  const std::vector<double>& thresholds) {
  std::vector<double> pooled;
  for (std::size_t u = 0; u < micro.n_units(); ++u)
    for (std::size_t t = 0; t < micro.n_periods(); ++t) {
      const auto& y = micro.cell(u, t).outcomes;
      pooled.insert(pooled.end(), y.begin(), y.end());
    }
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> out;
  for (double c : thresholds) {
    const auto below = std::upper_bound(pooled.begin(), pooled.end(), c) - pooled.begin();
    const double k = static_cast<double>(below) / static_cast<double>(pooled.size());
    if (!(k > 0.0 && k < 1.0))
      throw Error(Errc::invalid_argument,
                  "threshold " + std::to_string(c) + " lies outside the observed outcome range");
    out.push_back(k);
  }
  return out;
}

/// Quantile effect curve over a grid of kappas or outcome thresholds.
inline QuantileEffectCurve uqr_curve(const MicroPanel& micro, const std::vector<double>& grid,
                                     GridMode mode = GridMode::kappa, const UqrOptions& options = {}) {
  if (grid.empty()) throw Error(Errc::invalid_argument, "empty quantile grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw Error(Errc::invalid_argument, "grid must be strictly increasing");
  QuantileEffectCurve curve;
  curve.grid_mode = mode;
  curve.grid = grid;
  curve.se_mode = options.se_mode;
  curve.kappa = mode == GridMode::kappa ? grid : kappas_from_thresholds(micro, grid);

  const detail::UqrData data(micro);
  const std::size_t n = data.n_units();
  const detail::UqrFit full(data, detail::identity_clusters(n), options.bandwidth);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto pt = full.fit(curve.kappa[g]);
    curve.rif.push_back(pt.rif);
    curve.tau.push_back(pt.tau);
    curve.threshold.push_back(mode == GridMode::kappa ? pt.rif.quantile : grid[g]);
    if (options.se_mode == UqrSeMode::crve) curve.se.push_back(full.crve_se(pt));
    if (options.se_mode == UqrSeMode::hc2) curve.se.push_back(full.hc2_se(pt));
  }
  if (options.se_mode != UqrSeMode::bootstrap) return curve;

  if (options.replications < 2) throw Error(Errc::invalid_argument, "replications must be >= 2");
  const auto b_count = static_cast<std::size_t>(options.replications);
  std::vector<std::vector<double>> draws(b_count);
  parallel_for(b_count, options.workers, [&](std::size_t b) {
    CounterRng rng(options.seed, options.stream, static_cast<std::uint32_t>(b));
    std::vector<std::size_t> clusters(n);
    for (int tries = 0;; ++tries) {
      for (auto& c : clusters) c = rng.uniform_index(static_cast<std::uint32_t>(n));
      const auto treated = std::count(clusters.begin(), clusters.end(), std::size_t{0});
      if (treated > 0 && treated < static_cast<long>(n)) break;
      if (tries >= options.max_retries)
        throw Error(Errc::invalid_argument, "could not draw a cluster sample with both groups");
    }
    const detail::UqrFit fit(data, std::move(clusters), options.bandwidth);
    for (double k : curve.kappa) draws[b].push_back(fit.fit(k).tau);
  });
  curve.replications = options.replications;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> col;
    for (const auto& d : draws) col.push_back(d[g]);
    curve.se.push_back(stats::stddev(col));
  }
  return curve;
}

struct UqrEstimate {
  RifSpec rif;
  double tau = 0.0;
  double se = 0.0;
};

inline UqrEstimate uqr_did(const MicroPanel& micro, double kappa, const UqrOptions& options = {}) {
  const QuantileEffectCurve c = uqr_curve(micro, {kappa}, GridMode::kappa, options);
  return {c.rif[0], c.tau[0], c.se[0]};
}

}  // namespace sdid

#endif  // SDID_UQR_HPP

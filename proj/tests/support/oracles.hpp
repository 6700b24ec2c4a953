#ifndef SDID_TESTS_ORACLES_HPP
#define SDID_TESTS_ORACLES_HPP

// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks: brute-force enumeration, dense dummy
// designs with explicit inverses, quadrature instead of special functions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sdid/panel.hpp"
#include "sdid/simplex.hpp"

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Simplex programs as explicit quadratics f(w) = w'Qw + l'w + c.

struct Quadratic {
  Matrix q;
  Vector l;
  double c = 0.0;
  double operator()(const Vector& w) const { return w.dot(q * w) + l.dot(w) + c; }
};

inline Quadratic to_quadratic(const sdid::SimplexRidgeProblem& p) {
  Matrix a = p.design;
  Vector b = p.target;
  if (p.with_intercept) {
    const Eigen::RowVectorXd m = a.colwise().mean();
    a.rowwise() -= m;
    b.array() -= b.mean();
  }
  Quadratic f;
  f.q = a.transpose() * a;
  f.q.diagonal().array() += p.penalty;
  f.l = -2.0 * a.transpose() * b;
  f.c = b.squaredNorm();
  return f;
}

/// Minimum over the grid {w : w_i = k_i * step, sum w = 1}.
inline double grid_search_min(const sdid::SimplexRidgeProblem& p, double step) {
  const Quadratic f = to_quadratic(p);
  const auto k = static_cast<int>(p.design.cols());
  const int n = static_cast<int>(std::lround(1.0 / step));
  if (k == 1) return f(Vector::Ones(1));
  double best = std::numeric_limits<double>::infinity();
  Vector w = Vector::Zero(k);
  // The last two coordinates share the remainder; along that segment f is a
  // one-dimensional quadratic, so only the outer coordinates are enumerated.
  std::function<void(int, int)> rec = [&](int idx, int left) {
    if (idx == k - 2) {
      Vector w0 = w;
      w0[k - 2] = 0.0;
      w0[k - 1] = left * step;
      Vector d = Vector::Zero(k);
      d[k - 2] = 1.0;
      d[k - 1] = -1.0;
      const double f0 = f(w0);
      const double lin = 2.0 * w0.dot(f.q * d) + f.l.dot(d);
      const double quad = d.dot(f.q * d);
      // convex in a, so the grid minimum is next to the continuous one
      auto at = [&](int i) {
        const double a = i * step;
        best = std::min(best, f0 + a * lin + a * a * quad);
      };
      at(0);
      at(left);
      if (quad > 0.0) {
        const double star = std::clamp(-lin / (2.0 * quad) / step, 0.0, static_cast<double>(left));
        for (int i : {static_cast<int>(std::floor(star)), static_cast<int>(std::ceil(star))})
          if (i > 0 && i < left) at(i);
      }
      return;
    }
    for (int i = 0; i <= left; ++i) {
      w[idx] = i * step;
      rec(idx + 1, left - i);
    }
    w[idx] = 0.0;
  };
  rec(0, n);
  return best;
}

/// Exact minimum by enumerating supports and solving each equality
/// constrained KKT system; keeps the best primal-dual feasible point.
struct KktSolution {
  Vector w;
  double value = std::numeric_limits<double>::infinity();
};

inline KktSolution kkt_enumeration(const sdid::SimplexRidgeProblem& p) {
  const Quadratic f = to_quadratic(p);
  const auto k = static_cast<int>(p.design.cols());
  KktSolution best;
  for (int mask = 1; mask < (1 << k); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < k; ++i)
      if (mask & (1 << i)) s.push_back(i);
    const auto m = static_cast<Eigen::Index>(s.size());
    Matrix kkt = Matrix::Zero(m + 1, m + 1);
    Vector rhs(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) kkt(i, j) = 2.0 * f.q(s[i], s[j]);
      kkt(i, m) = 1.0;
      kkt(m, i) = 1.0;
      rhs[i] = -f.l[s[i]];
    }
    rhs[m] = 1.0;
    const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
    Vector w = Vector::Zero(k);
    bool feasible = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (sol[i] < -1e-12) feasible = false;
      w[s[i]] = std::max(0.0, sol[i]);
    }
    if (!feasible) continue;
    w /= w.sum();
    const Vector g = 2.0 * f.q * w + f.l;
    const double mu = -sol[m];
    bool optimal = true;
    for (int j = 0; j < k; ++j)
      if (!(mask & (1 << j)) && g[j] < mu - 1e-9 * (1.0 + std::fabs(mu))) optimal = false;
    if (!optimal) continue;
    const double v = f(w);
    if (v < best.value) best = {w, v};
  }
  return best;
}

/// Projection onto the simplex by bisection on the threshold.
inline Vector project_bisect(const Vector& v) {
  double lo = v.minCoeff() - 1.0;
  double hi = v.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = (v.array() - mid).max(0.0).sum();
    (s > 1.0 ? lo : hi) = mid;
  }
  return (v.array() - 0.5 * (lo + hi)).max(0.0).matrix();
}

/// Accelerated projected gradient.
inline Vector fista(const sdid::SimplexRidgeProblem& p, int iters = 20000) {
  const Quadratic f = to_quadratic(p);
  const auto k = f.q.rows();
  const double lip = 2.0 * f.q.operatorNorm() + 1e-12;
  Vector x = Vector::Constant(k, 1.0 / static_cast<double>(k));
  Vector y = x;
  double t = 1.0;
  for (int i = 0; i < iters; ++i) {
    const Vector g = 2.0 * f.q * y + f.l;
    const Vector next = project_bisect(y - g / lip);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / tn) * (next - x);
    x = next;
    t = tn;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Dense dummy-variable regressions.

/// Design: intercept, unit dummies 1..N-1, period dummies 1..T-1, D for unit 0
/// in periods >= n_pre, then extra cell covariates.
inline Matrix twfe_design(Eigen::Index n, Eigen::Index t, Eigen::Index n_pre,
                          const std::vector<Matrix>& covariates = {}) {
  const auto k = static_cast<Eigen::Index>(covariates.size());
  Matrix x = Matrix::Zero(n * t, n + t + k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < t; ++c) {
      const Eigen::Index r = i * t + c;
      x(r, 0) = 1.0;
      if (i > 0) x(r, i) = 1.0;
      if (c > 0) x(r, n - 1 + c) = 1.0;
      if (i == 0 && c >= n_pre) x(r, n + t - 1) = 1.0;
      for (Eigen::Index j = 0; j < k; ++j) x(r, n + t + j) = covariates[static_cast<std::size_t>(j)](i, c);
    }
  return x;
}

inline Vector stack_rows(const Matrix& y) {
  Vector v(y.size());
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index c = 0; c < y.cols(); ++c) v[i * y.cols() + c] = y(i, c);
  return v;
}

/// D coefficient and its CR1 cluster-robust variance (clusters = units),
/// using the explicit inverse of X'X. `k_dof` is the parameter count used in
/// the small-sample factor.
struct TwfeOracle {
  double tau = 0.0;
  double se = 0.0;
};

inline TwfeOracle dense_twfe_crve(const Matrix& y, Eigen::Index n_pre, double k_dof) {
  const Eigen::Index n = y.rows();
  const Eigen::Index t = y.cols();
  const Matrix x = twfe_design(n, t, n_pre);
  const Vector yy = stack_rows(y);
  const Matrix inv = (x.transpose() * x).inverse();
  const Vector beta = inv * x.transpose() * yy;
  const Vector u = yy - x * beta;
  Matrix meat = Matrix::Zero(x.cols(), x.cols());
  for (Eigen::Index g = 0; g < n; ++g) {
    const Vector s = x.middleRows(g * t, t).transpose() * u.segment(g * t, t);
    meat += s * s.transpose();
  }
  const double nn = static_cast<double>(n * t);
  const double gg = static_cast<double>(n);
  const Matrix v = inv * meat * inv * (gg / (gg - 1.0) * (nn - 1.0) / (nn - k_dof));
  const Eigen::Index d = n + t - 1;
  return {beta[d], std::sqrt(v(d, d))};
}

/// Weighted two-way FE DiD with cell weights omega_i * lambda_t over the full
/// dummy design (minimum-norm solve, so zero-weight units are harmless).
inline double weighted_twfe_tau(const Matrix& y, Eigen::Index n_pre, const Vector& unit_w,
                                const Vector& time_w) {
  const Eigen::Index n = y.rows();
  const Eigen::Index t = y.cols();
  const Matrix x = twfe_design(n, t, n_pre);
  Vector sw(n * t);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < t; ++c) sw[i * t + c] = std::sqrt(unit_w[i] * time_w[c]);
  const Matrix xw = sw.asDiagonal() * x;
  const Vector yw = sw.asDiagonal() * stack_rows(y);
  const Vector beta = xw.completeOrthogonalDecomposition().solve(yw);
  return beta[n + t - 1];
}

/// Ridge with unpenalized intercept through an augmented least-squares
/// system solved by SVD; penalty 0 gives the minimum-norm slope.
struct LinearFit {
  double intercept = 0.0;
  Vector slope;
  double operator()(const Vector& x) const { return intercept + slope.dot(x); }
};

inline LinearFit svd_ridge(const Matrix& x, const Vector& y, double penalty) {
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const Matrix xc = x.rowwise() - xm;
  const Vector yc = y.array() - y.mean();
  Matrix aug(xc.rows() + xc.cols(), xc.cols());
  aug << xc, std::sqrt(penalty) * Matrix::Identity(xc.cols(), xc.cols());
  Vector rhs = Vector::Zero(aug.rows());
  rhs.head(yc.size()) = yc;
  Eigen::JacobiSVD<Matrix> svd(aug, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  LinearFit f;
  f.slope = svd.solve(rhs);
  f.intercept = y.mean() - xm.dot(f.slope);
  return f;
}

// ---------------------------------------------------------------------------
// Distributions.

/// Two-sided Student-t tail probability by Simpson quadrature of the density.
inline double t_two_sided_p(double t, double df) {
  const double a = std::fabs(t);
  const double logc = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi);
  auto dens = [&](double s) { return std::exp(logc - 0.5 * (df + 1.0) * std::log1p(s * s / df)); };
  // s = a + z / (1 - z) maps [0, 1) onto [a, inf).
  auto g = [&](double z) {
    if (z >= 1.0) return 0.0;
    const double one = 1.0 - z;
    return dens(a + z / one) / (one * one);
  };
  const int m = 200000;
  const double h = 1.0 / m;
  double sum = g(0.0) + g(1.0);
  for (int i = 1; i < m; ++i) sum += (i % 2 ? 4.0 : 2.0) * g(i * h);
  return 2.0 * sum * h / 3.0;
}

// ---------------------------------------------------------------------------
// Random inputs.

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(gen);
  return m;
}

inline sdid::BalancedPanel make_panel(const Matrix& y, Eigen::Index n_pre,
                                      std::optional<Matrix> counts = std::nullopt,
                                      sdid::CovariateBlock cov = {}) {
  std::vector<std::string> units;
  for (Eigen::Index i = 0; i < y.rows(); ++i) units.push_back("u" + std::to_string(i));
  std::vector<int> times;
  for (Eigen::Index c = 0; c < y.cols(); ++c) times.push_back(2000 + static_cast<int>(c));
  return sdid::BalancedPanel(units, times, y, 2000 + static_cast<int>(n_pre), std::move(counts), std::move(cov));
}

/// Additive panel alpha_i + beta_t (+ tau on treated post cells) plus noise.
inline Matrix additive_panel(std::mt19937_64& gen, Eigen::Index n, Eigen::Index t, Eigen::Index n_pre,
                             double tau, double noise_sd) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector alpha(n), beta(t);
  for (auto& a : alpha) a = nd(gen);
  for (auto& b : beta) b = nd(gen);
  Matrix y(n, t);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < t; ++c)
      y(i, c) = alpha[i] + beta[c] + (i == 0 && c >= n_pre ? tau : 0.0) + noise_sd * nd(gen);
  return y;
}

}  // namespace oracle

#endif  // SDID_TESTS_ORACLES_HPP

#ifndef SDID_ESTIMATORS_HPP
#define SDID_ESTIMATORS_HPP

// Point estimators for a single treated unit: difference-in-differences,
// synthetic control, synthetic difference-in-differences, and synthetic
// control with regression bias correction. All assume the BalancedPanel
// convention that row 0 is treated from column n_pre() on.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdid/error.hpp"
#include "sdid/panel.hpp"
#include "sdid/regression.hpp"
#include "sdid/simplex.hpp"

namespace sdid {

enum class Method { did, sc, sdid, sc_bias_corrected };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::did: return "DID";
    case Method::sc: return "SC";
    case Method::sdid: return "SDID";
    case Method::sc_bias_corrected: return "SC_BIAS_CORRECTED";
  }
  return "?";
}

/// Unit weights over controls and time weights over pre-periods. Post-period
/// time weights are implicitly 1 / n_post.
struct WeightSet {
  double unit_intercept = 0.0;
  Vector unit_weights;
  double time_intercept = 0.0;
  Vector time_weights;
  double zeta = 0.0;
  double xi = 0.0;
};

struct EstimateResult {
  double tau = 0.0;
  Method method = Method::did;
  std::optional<WeightSet> weights;
  double pre_rmspe = 0.0;
  Vector counterfactual;  // over post periods
  Vector effects;         // treated minus counterfactual, post periods
  Vector pre_gaps;        // treated minus counterfactual, pre periods
  std::map<std::string, double> diagnostics;
  std::vector<std::string> flags;
};

/// Thrown when a weight program fails to certify its optimum.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& program, const NoConvergence& cause)
      : Error(Errc::solver_failure, program + " weights did not converge (duality gap " +
                                        std::to_string(cause.best().kkt_gap) + " after " +
                                        std::to_string(cause.best().iterations) + " iterations)"),
        gap_(cause.best().kkt_gap) {}
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

namespace detail {

inline double rms(const Vector& v) { return v.size() ? std::sqrt(v.squaredNorm() / v.size()) : 0.0; }

inline SimplexSolution solve_weights(const SimplexRidgeProblem& p, const SolverOptions& opt,
                                     const char* program) {
  try {
    return solve(p, opt);
  } catch (const NoConvergence& e) {
    throw SolverFailure(program, e);
  }
}

// Fills counterfactual / effects / pre_gaps from a full-length synthetic path.
inline void fill_paths(EstimateResult& r, const BalancedPanel& panel, const Vector& synthetic) {
  const Vector treated = panel.outcomes().row(0).transpose();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index post = panel.n_post();
  r.counterfactual = synthetic.tail(post);
  r.effects = treated.tail(post) - r.counterfactual;
  r.pre_gaps = treated.head(pre) - synthetic.head(pre);
  r.pre_rmspe = rms(r.pre_gaps);
}

}  // namespace detail

/// Difference-in-differences with unweighted control means; identical to the
/// two-way fixed-effects coefficient on D for a block design.
inline EstimateResult did_estimate(const BalancedPanel& panel) {
  const Matrix& y = panel.outcomes();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index post = panel.n_post();
  const Eigen::Index n0 = panel.n_controls();
  const Vector control_mean = y.bottomRows(n0).colwise().mean().transpose();
  const double treated_pre = y.row(0).head(pre).mean();
  const double control_pre = control_mean.head(pre).mean();
  EstimateResult r;
  r.method = Method::did;
  const Vector synthetic = control_mean.array() + (treated_pre - control_pre);
  detail::fill_paths(r, panel, synthetic);
  r.tau = (y.row(0).tail(post).mean() - treated_pre) - (control_mean.tail(post).mean() - control_pre);
  return r;
}

/// Synthetic control: simplex weights on controls matching the treated
/// pre-period path with no intercept and no penalty.
inline EstimateResult sc_estimate(const BalancedPanel& panel, const SolverOptions& solver = {}) {
  const Matrix& y = panel.outcomes();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index n0 = panel.n_controls();
  SimplexRidgeProblem p;
  p.design = y.bottomRows(n0).leftCols(pre).transpose();
  p.target = y.row(0).head(pre).transpose();
  p.penalty = 0.0;
  p.with_intercept = false;
  const SimplexSolution sol = detail::solve_weights(p, solver, "synthetic control unit");

  EstimateResult r;
  r.method = Method::sc;
  const Vector synthetic = y.bottomRows(n0).transpose() * sol.weights;
  detail::fill_paths(r, panel, synthetic);
  r.tau = r.effects.mean();
  WeightSet w;
  w.unit_weights = sol.weights;
  w.time_weights = Vector::Zero(0);
  r.weights = std::move(w);
  r.diagnostics["unit_gap"] = sol.kkt_gap;
  r.diagnostics["unit_iterations"] = sol.iterations;
  return r;
}

/// Data-driven regularization. sigma is the standard deviation of first
/// differences of control outcomes within the pre-period.
struct Regularization {
  double zeta = 0.0;
  double xi = 0.0;
  double sigma = 0.0;
  bool zero_variance = false;
};

inline Regularization compute_zeta(const BalancedPanel& panel) {
  const Matrix& y = panel.outcomes();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index n0 = panel.n_controls();
  std::vector<double> diffs;
  diffs.reserve(static_cast<std::size_t>(n0 * (pre - 1)));
  for (Eigen::Index j = 1; j <= n0; ++j)
    for (Eigen::Index t = 0; t + 1 < pre; ++t) diffs.push_back(y(j, t + 1) - y(j, t));
  Regularization reg;
  reg.sigma = stats::stddev(diffs);
  if (!(reg.sigma > 0.0)) {
    reg.sigma = 0.0;
    reg.zero_variance = true;
  }
  constexpr double n_treated = 1.0;
  reg.zeta = std::pow(n_treated * static_cast<double>(panel.n_post()), 0.25) * reg.sigma;
  reg.xi = 1e-6 * reg.sigma;
  return reg;
}

/// Unit weights (intercept, penalty zeta^2 * T_pre) and time weights
/// (intercept, penalty xi^2 * T_pre).
///
/// The time-weight program regresses each control's post-period mean on its
/// pre-period outcomes; post periods carry the fixed weight 1 / T_post.
inline WeightSet sdid_weights(const BalancedPanel& panel, double zeta, double xi,
                              const SolverOptions& solver = {}) {
  const Matrix& y = panel.outcomes();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index post = panel.n_post();
  const Eigen::Index n0 = panel.n_controls();
  const auto t_pre = static_cast<double>(pre);

  SimplexRidgeProblem unit;
  unit.design = y.bottomRows(n0).leftCols(pre).transpose();
  unit.target = y.row(0).head(pre).transpose();
  unit.penalty = zeta * zeta * t_pre;
  unit.with_intercept = true;
  const SimplexSolution omega = detail::solve_weights(unit, solver, "unit");

  SimplexRidgeProblem time;
  time.design = y.bottomRows(n0).leftCols(pre);
  time.target = y.bottomRows(n0).rightCols(post).rowwise().mean();
  time.penalty = xi * xi * t_pre;
  time.with_intercept = true;
  const SimplexSolution lambda = detail::solve_weights(time, solver, "time");

  WeightSet w;
  w.unit_intercept = omega.intercept;
  w.unit_weights = omega.weights;
  w.time_intercept = lambda.intercept;
  w.time_weights = lambda.weights;
  w.zeta = zeta;
  w.xi = xi;
  return w;
}

/// Weighted double difference for given weights.
inline double sdid_tau(const BalancedPanel& panel, const WeightSet& w) {
  const Matrix& y = panel.outcomes();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index post = panel.n_post();
  const Eigen::Index n0 = panel.n_controls();
  // Per-unit contrast: post mean minus lambda-weighted pre level.
  const Vector contrast =
      y.rightCols(post).rowwise().mean() - y.leftCols(pre) * w.time_weights;
  return contrast[0] - w.unit_weights.dot(contrast.tail(n0));
}

/// The same estimate as the D coefficient of the omega x lambda weighted
/// two-way fixed-effects regression. Units and periods with zero weight drop
/// out of the regression.
inline double sdid_regression_tau(const BalancedPanel& panel, const WeightSet& w) {
  const Matrix& y = panel.outcomes();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index post = panel.n_post();
  std::vector<Eigen::Index> units{0};
  std::vector<double> unit_w{1.0};
  for (Eigen::Index j = 0; j < w.unit_weights.size(); ++j)
    if (w.unit_weights[j] > 0.0) {
      units.push_back(j + 1);
      unit_w.push_back(w.unit_weights[j]);
    }
  std::vector<Eigen::Index> periods;
  std::vector<double> period_w;
  for (Eigen::Index t = 0; t < pre; ++t)
    if (w.time_weights[t] > 0.0) {
      periods.push_back(t);
      period_w.push_back(w.time_weights[t]);
    }
  for (Eigen::Index t = pre; t < pre + post; ++t) {
    periods.push_back(t);
    period_w.push_back(1.0 / static_cast<double>(post));
  }
  const auto nu = static_cast<Eigen::Index>(units.size());
  const auto nt = static_cast<Eigen::Index>(periods.size());
  // Columns: intercept, unit dummies 1..nu-1, period dummies 1..nt-1, D.
  const Eigen::Index k = 1 + (nu - 1) + (nt - 1) + 1;
  Matrix x = Matrix::Zero(nu * nt, k);
  Vector rhs(nu * nt);
  for (Eigen::Index a = 0; a < nu; ++a) {
    for (Eigen::Index b = 0; b < nt; ++b) {
      const Eigen::Index row = a * nt + b;
      const double sw = std::sqrt(unit_w[static_cast<std::size_t>(a)] *
                                  period_w[static_cast<std::size_t>(b)]);
      x(row, 0) = sw;
      if (a > 0) x(row, a) = sw;
      if (b > 0) x(row, nu - 1 + b) = sw;
      const Eigen::Index t = periods[static_cast<std::size_t>(b)];
      if (a == 0 && t >= pre) x(row, k - 1) = sw;
      rhs[row] = sw * y(units[static_cast<std::size_t>(a)], t);
    }
  }
  const Vector coef = regression::least_squares(x, rhs);
  return coef[k - 1];
}

/// Fixed weights version of sdid_estimate.
inline EstimateResult sdid_estimate_with_weights(const BalancedPanel& panel, const WeightSet& w) {
  const Matrix& y = panel.outcomes();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index n0 = panel.n_controls();
  EstimateResult r;
  r.method = Method::sdid;
  r.tau = sdid_tau(panel, w);
  // Synthetic path: omega-weighted controls shifted so that the lambda
  // weighted pre-period levels match.
  const Vector synthetic_raw = y.bottomRows(n0).transpose() * w.unit_weights;
  const double shift = y.row(0).head(pre).dot(w.time_weights) -
                       synthetic_raw.head(pre).dot(w.time_weights);
  detail::fill_paths(r, panel, synthetic_raw.array() + shift);
  // Pre-fit quality of the unit weights themselves (up to the intercept).
  const Vector unit_fit = y.row(0).head(pre).transpose() -
                          (synthetic_raw.head(pre).array() + w.unit_intercept).matrix();
  r.pre_rmspe = detail::rms(unit_fit);
  r.weights = w;
  r.diagnostics["zeta"] = w.zeta;
  r.diagnostics["xi"] = w.xi;
  return r;
}

struct SdidOptions {
  std::optional<double> zeta;  // override of the data-driven value
  std::optional<double> xi;
  SolverOptions solver;
};

/// Synthetic difference-in-differences: regularization, weights, then the
/// weighted double difference. The regression form is computed alongside and
/// reported as a diagnostic.
inline EstimateResult sdid_estimate(const BalancedPanel& panel, const SdidOptions& options = {},
                                    bool check_regression = true) {
  const Regularization reg = compute_zeta(panel);
  const double zeta = options.zeta.value_or(reg.zeta);
  const double xi = options.xi.value_or(reg.xi);
  const WeightSet w = sdid_weights(panel, zeta, xi, options.solver);
  EstimateResult r = sdid_estimate_with_weights(panel, w);
  r.diagnostics["sigma"] = reg.sigma;
  if (reg.zero_variance && !options.zeta) r.flags.push_back("zero_variance");
  if (check_regression) {
    const double tau_reg = sdid_regression_tau(panel, w);
    r.diagnostics["tau_regression"] = tau_reg;
    r.diagnostics["path_discrepancy"] = std::fabs(tau_reg - r.tau);
  }
  return r;
}

/// Result of residualizing outcomes on covariates fitted off the treated cells.
struct CovariateAdjustment {
  BalancedPanel panel;
  Vector beta;                            // aligned with panel covariate names
  std::vector<std::string> zero_columns;  // identically zero, beta fixed at 0
};

/// Regresses y on covariates plus unit and period dummies over every cell with
/// D = 0, then subtracts X * beta from all cells (treated included).
inline CovariateAdjustment adjust_covariates(const BalancedPanel& panel) {
  if (!panel.has_covariates())
    throw Error(Errc::invalid_argument, "panel has no cell covariates to adjust for");
  const auto& cov = panel.covariates();
  const Eigen::Index n = panel.n_units();
  const Eigen::Index t = panel.n_periods();
  const Eigen::Index post = panel.n_post();
  const auto k_all = static_cast<Eigen::Index>(cov.names.size());

  std::vector<Eigen::Index> active;
  std::vector<std::string> zero_columns;
  for (Eigen::Index k = 0; k < k_all; ++k) {
    if (cov.values[static_cast<std::size_t>(k)].isZero(0.0))
      zero_columns.push_back(cov.names[static_cast<std::size_t>(k)]);
    else
      active.push_back(k);
  }
  const auto ka = static_cast<Eigen::Index>(active.size());

  const Eigen::Index rows = n * t - post;
  // Columns: intercept, unit dummies, period dummies, then covariates so the
  // rank check blames covariates rather than fixed effects.
  const Eigen::Index cols = 1 + (n - 1) + (t - 1) + ka;
  Matrix x = Matrix::Zero(rows, cols);
  Vector yv(rows);
  std::vector<std::string> names{"(intercept)"};
  for (Eigen::Index i = 1; i < n; ++i) names.push_back("unit:" + panel.units()[static_cast<std::size_t>(i)]);
  for (Eigen::Index c = 1; c < t; ++c) names.push_back("time:" + std::to_string(panel.times()[static_cast<std::size_t>(c)]));
  for (Eigen::Index k : active) names.push_back(cov.names[static_cast<std::size_t>(k)]);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < t; ++c) {
      if (panel.treated(i, c)) continue;
      x(row, 0) = 1.0;
      if (i > 0) x(row, i) = 1.0;
      if (c > 0) x(row, n - 1 + c) = 1.0;
      for (Eigen::Index a = 0; a < ka; ++a)
        x(row, n + t - 1 + a) = cov.values[static_cast<std::size_t>(active[static_cast<std::size_t>(a)])](i, c);
      yv[row] = panel.outcomes()(i, c);
      ++row;
    }
  }
  Vector beta = Vector::Zero(k_all);
  if (ka > 0) {
    const Vector coef = regression::least_squares(x, yv, names);
    for (Eigen::Index a = 0; a < ka; ++a)
      beta[active[static_cast<std::size_t>(a)]] = coef[n + t - 1 + a];
  }
  Matrix adjusted = panel.outcomes();
  for (Eigen::Index k = 0; k < k_all; ++k) adjusted -= beta[k] * cov.values[static_cast<std::size_t>(k)];
  return {panel.with_outcomes(std::move(adjusted)), std::move(beta), std::move(zero_columns)};
}

struct BiasCorrectionOptions {
  // Ridge penalty for the per-period outcome regressions. Defaults to
  // 1e-6 * trace(centered predictor Gram) / n_predictors.
  std::optional<double> ridge_penalty;
  bool zero_regression = false;  // force m(x) = 0, which reduces to plain SC
  SolverOptions solver;
};

/// Synthetic control with per-period regression bias correction. Predictors
/// are all pre-period outcomes. For every period t a ridge regression of the
/// controls' y_t on their predictors gives m_t, and
///   gap_t = (y_1t - m_t(x_1)) - sum_j w_j (y_jt - m_t(x_j)).
inline EstimateResult bias_corrected_sc(const BalancedPanel& panel,
                                        const BiasCorrectionOptions& options = {}) {
  EstimateResult sc = sc_estimate(panel, options.solver);
  const Matrix& y = panel.outcomes();
  const Eigen::Index pre = panel.n_pre();
  const Eigen::Index n0 = panel.n_controls();
  const Eigen::Index t_all = panel.n_periods();
  const Vector& omega = sc.weights->unit_weights;

  const Matrix predictors = y.leftCols(pre);  // row j = x_j
  const Matrix control_x = predictors.bottomRows(n0);
  double penalty = 0.0;
  if (options.ridge_penalty) {
    penalty = *options.ridge_penalty;
  } else {
    const Matrix centered = control_x.rowwise() - control_x.colwise().mean();
    penalty = 1e-6 * (centered.transpose() * centered).trace() / static_cast<double>(pre);
  }
  if (!(penalty >= 0.0)) throw Error(Errc::invalid_argument, "ridge penalty must be >= 0");

  Vector gaps(t_all);
  bool ill_conditioned = false;
  for (Eigen::Index t = 0; t < t_all; ++t) {
    const Vector yt = y.col(t);
    double treated_adj = yt[0];
    Vector control_adj = yt.tail(n0);
    if (!options.zero_regression) {
      const regression::RidgeFit fit =
          regression::ridge_with_intercept(control_x, yt.tail(n0), penalty);
      ill_conditioned = ill_conditioned || fit.ill_conditioned;
      treated_adj -= fit.predict(predictors.row(0).transpose());
      for (Eigen::Index j = 0; j < n0; ++j) control_adj[j] -= fit.predict(control_x.row(j).transpose());
    }
    gaps[t] = treated_adj - omega.dot(control_adj);
  }

  EstimateResult r;
  r.method = Method::sc_bias_corrected;
  r.weights = sc.weights;
  r.pre_gaps = gaps.head(pre);
  r.effects = gaps.tail(panel.n_post());
  r.counterfactual = y.row(0).tail(panel.n_post()).transpose() - r.effects;
  r.pre_rmspe = detail::rms(r.pre_gaps);
  r.tau = r.effects.mean();
  r.diagnostics["sc_tau"] = sc.tau;
  r.diagnostics["sc_pre_rmspe"] = sc.pre_rmspe;
  r.diagnostics["ridge_penalty"] = penalty;
  if (ill_conditioned) r.flags.push_back("ill_conditioned");
  return r;
}

/// Estimator choice plus its options, for routines that refit repeatedly.
struct EstimatorConfig {
  Method method = Method::sdid;
  SdidOptions sdid;
  BiasCorrectionOptions bias_correction;
};

inline EstimateResult estimate(const BalancedPanel& panel, const EstimatorConfig& config) {
  switch (config.method) {
    case Method::did: return did_estimate(panel);
    case Method::sc: return sc_estimate(panel, config.sdid.solver);
    case Method::sdid: return sdid_estimate(panel, config.sdid, false);
    case Method::sc_bias_corrected: return bias_corrected_sc(panel, config.bias_correction);
  }
  throw Error(Errc::invalid_argument, "unknown estimator");
}

}  // namespace sdid

#endif  // SDID_ESTIMATORS_HPP

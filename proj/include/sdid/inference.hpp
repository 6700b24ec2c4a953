#ifndef SDID_INFERENCE_HPP
#define SDID_INFERENCE_HPP

// Standard errors and p-values for a single treated unit:
//   crve_se                    cluster-robust sandwich for the TWFE DiD
//   placebo_inference          placebo-assignment SE, normal or t(N-2) p-value
//   cluster_residual_bootstrap restricted residual bootstrap with a cluster-size
//                              variance law Var(W_j) = A + B / M_j
//   modified_block_bootstrap   two-stage block / within-cell bootstrap
//   rmspe_ratio_test           post/pre RMSPE rank over placebo fits
//   rearrangement_test         per-unit post coefficients and the maximal
//                              relative heteroskedasticity that still rejects

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdid/error.hpp"
#include "sdid/estimators.hpp"
#include "sdid/panel.hpp"
#include "sdid/parallel.hpp"
#include "sdid/regression.hpp"
#include "sdid/rng.hpp"
#include "sdid/stats.hpp"

namespace sdid {

enum class InferenceMethod { crve, placebo_normal, placebo_t, crb, mbb, rmspe_ratio, rearrangement };

inline const char* to_string(InferenceMethod m) {
  switch (m) {
    case InferenceMethod::crve: return "CRVE";
    case InferenceMethod::placebo_normal: return "PLACEBO_NORMAL";
    case InferenceMethod::placebo_t: return "PLACEBO_T";
    case InferenceMethod::crb: return "CRB";
    case InferenceMethod::mbb: return "MBB";
    case InferenceMethod::rmspe_ratio: return "RMSPE_RATIO";
    case InferenceMethod::rearrangement: return "REARRANGEMENT";
  }
  return "?";
}

struct InferenceResult {
  double estimate = 0.0;
  std::optional<double> se;  // absent for rank-only tests
  double p_value = 1.0;
  InferenceMethod method = InferenceMethod::crve;
  int replications = 0;
  std::optional<std::vector<double>> null_distribution;
  std::map<std::string, double> extras;
  std::vector<std::string> flags;
};

enum class DfMode { normal, t_corrected };

namespace detail {

// p-value from a z/t statistic with a zero-SE guard.
inline double wald_p(double estimate, double se, DfMode mode, double df,
                     std::vector<std::string>& flags) {
  if (!(se > 0.0)) {
    flags.push_back("zero_se");
    return estimate == 0.0 ? 1.0 : 0.0;
  }
  const double z = estimate / se;
  return mode == DfMode::normal ? stats::normal_two_sided_p(z) : stats::t_two_sided_p(z, df);
}

// Per-unit post mean minus pre mean.
inline Vector post_minus_pre(const Matrix& y, Eigen::Index n_pre) {
  const Eigen::Index post = y.cols() - n_pre;
  return y.rightCols(post).rowwise().mean() - y.leftCols(n_pre).rowwise().mean();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CRVE

/// Cluster-robust (by unit) SE of the two-way FE DiD coefficient, with the
/// CR1 factor G/(G-1) * (n-1)/(n-k), k = constant + period dummies + D (unit
/// effects are nested in the clusters). p-value from t(G-1).
inline InferenceResult crve_se(const BalancedPanel& panel) {
  const regression::TwfeFit fit = regression::twfe_did(panel.outcomes(), panel.n_pre());
  const Eigen::Index g = panel.n_units();
  const Eigen::Index t = panel.n_periods();
  double meat = 0.0;
  for (Eigen::Index j = 0; j < g; ++j) {
    const double score = fit.treatment_dm.row(j).dot(fit.residuals.row(j));
    meat += score * score;
  }
  const auto n = static_cast<double>(g * t);
  const auto k = static_cast<double>(t + 1);
  const auto gd = static_cast<double>(g);
  const double correction = gd / (gd - 1.0) * (n - 1.0) / (n - k);
  const double var = correction * meat / (fit.treatment_ss * fit.treatment_ss);
  InferenceResult r;
  r.method = InferenceMethod::crve;
  r.estimate = fit.tau;
  r.se = std::sqrt(var);
  r.p_value = detail::wald_p(fit.tau, *r.se, DfMode::t_corrected, gd - 1.0, r.flags);
  r.extras["df"] = gd - 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// Placebo

struct PlaceboOptions {
  int replications = 200;
  DfMode df_mode = DfMode::t_corrected;
  std::uint64_t seed = 0;
  std::uint64_t stream = stream_id(StreamDomain::placebo, 0);
  int workers = 1;
};

/// Placebo effects: each replication samples a control uniformly with
/// replacement, drops the real treated unit, and re-estimates with the
/// sampled control treated. Repeated draws of a control reuse its fit.
inline std::vector<double> placebo_distribution(const BalancedPanel& panel,
                                                const EstimatorConfig& config,
                                                const PlaceboOptions& options) {
  const Eigen::Index n0 = panel.n_controls();
  if (n0 < 3)
    throw Error(Errc::too_few_controls,
                "placebo inference needs at least 3 controls (2 remain as donors)");
  if (options.replications < 1) throw Error(Errc::invalid_argument, "replications must be >= 1");
  CounterRng rng(options.seed, options.stream);
  std::vector<Eigen::Index> draws(static_cast<std::size_t>(options.replications));
  for (auto& d : draws) d = 1 + static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint32_t>(n0)));

  std::vector<char> needed(static_cast<std::size_t>(n0 + 1), 0);
  for (auto d : draws) needed[static_cast<std::size_t>(d)] = 1;
  std::vector<Eigen::Index> unique;
  for (Eigen::Index j = 1; j <= n0; ++j)
    if (needed[static_cast<std::size_t>(j)]) unique.push_back(j);
  std::vector<double> tau_of(static_cast<std::size_t>(n0 + 1), 0.0);
  parallel_for(unique.size(), options.workers, [&](std::size_t i) {
    const Eigen::Index j = unique[i];
    tau_of[static_cast<std::size_t>(j)] = estimate(panel.placebo(j), config).tau;
  });
  std::vector<double> out;
  out.reserve(draws.size());
  for (auto d : draws) out.push_back(tau_of[static_cast<std::size_t>(d)]);
  return out;
}

/// SE = standard deviation (1/B) of the placebo effects; p-value from N(0,1)
/// or from t with N - 2 degrees of freedom, N = number of units.
inline InferenceResult placebo_from_distribution(double tau, std::vector<double> placebo,
                                                 Eigen::Index n_units, DfMode mode) {
  InferenceResult r;
  r.method = mode == DfMode::normal ? InferenceMethod::placebo_normal : InferenceMethod::placebo_t;
  r.estimate = tau;
  r.replications = static_cast<int>(placebo.size());
  r.se = stats::stddev(placebo, 0);
  const double df = static_cast<double>(n_units - 2);
  r.p_value = detail::wald_p(tau, *r.se, mode, df, r.flags);
  if (mode == DfMode::t_corrected) r.extras["df"] = df;
  r.null_distribution = std::move(placebo);
  return r;
}

inline InferenceResult placebo_inference(const BalancedPanel& panel, const EstimatorConfig& config,
                                         const PlaceboOptions& options = {}) {
  if (options.replications < 50)
    throw Error(Errc::invalid_argument, "placebo inference needs at least 50 replications");
  if (config.method == Method::sc_bias_corrected)
    throw Error(Errc::invalid_argument, "placebo inference supports DID, SC and SDID");
  const double tau = estimate(panel, config).tau;
  return placebo_from_distribution(tau, placebo_distribution(panel, config, options),
                                   panel.n_units(), options.df_mode);
}

// ---------------------------------------------------------------------------
// Cluster residual bootstrap

struct CrbOptions {
  int replications = 1000;
  std::uint64_t seed = 0;
  std::uint64_t stream = stream_id(StreamDomain::crb, 0);
};

/// Fit of Var(W_j) = A + B / M_j over the controls, A, B >= 0.
struct VarianceLaw {
  double a = 0.0;
  double b = 0.0;
  double operator()(double m) const { return a + b / m; }
};

inline VarianceLaw fit_variance_law(const std::vector<double>& inv_m, const std::vector<double>& sq) {
  const auto n = static_cast<double>(inv_m.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < inv_m.size(); ++i) {
    sx += inv_m[i];
    sy += sq[i];
    sxx += inv_m[i] * inv_m[i];
    sxy += inv_m[i] * sq[i];
  }
  auto sse = [&](const VarianceLaw& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < inv_m.size(); ++i) {
      const double e = v.a + v.b * inv_m[i] - sq[i];
      s += e * e;
    }
    return s;
  };
  // Candidates: unconstrained fit if feasible, else the best boundary fit.
  std::vector<VarianceLaw> candidates;
  const double det = n * sxx - sx * sx;
  if (det > 1e-300 * std::max(1.0, n * sxx)) {
    const VarianceLaw free{(sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det};
    if (free.a >= 0.0 && free.b >= 0.0) candidates.push_back(free);
  }
  candidates.push_back({std::max(0.0, sy / n), 0.0});
  if (sxx > 0.0) candidates.push_back({0.0, std::max(0.0, sxy / sxx)});
  return *std::min_element(candidates.begin(), candidates.end(),
                           [&](const auto& l, const auto& r) { return sse(l) < sse(r); });
}

/// Restricted (tau = 0) residual bootstrap of the per-unit post-minus-pre
/// contrasts with cluster-size heteroskedasticity correction.
///
/// W_j is unit j's post mean minus pre mean. Under the null the two-way FE
/// residual contrast is W_j - mean(W), inflated by sqrt(N/(N-1)). The variance
/// law is fitted on the controls, every residual is normalized by its fitted
/// SD, and each bootstrap draw assigns every unit a normalized residual drawn
/// with replacement, rescaled to that unit's fitted variance.
inline InferenceResult cluster_residual_bootstrap(const BalancedPanel& panel,
                                                  const CrbOptions& options = {}) {
  if (!panel.cell_counts())
    throw Error(Errc::invalid_argument, "cluster residual bootstrap needs cell counts");
  if (options.replications < 200)
    throw Error(Errc::invalid_argument, "cluster residual bootstrap needs at least 200 replications");
  const Eigen::Index n = panel.n_units();
  const Eigen::Index n0 = panel.n_controls();
  const Vector w = detail::post_minus_pre(panel.outcomes(), panel.n_pre());
  const double tau = w[0] - w.tail(n0).mean();
  const double inflate = std::sqrt(static_cast<double>(n) / static_cast<double>(n - 1));
  const Vector resid = (w.array() - w.mean()) * inflate;
  const Vector m = panel.cell_counts()->rowwise().mean();

  std::vector<double> inv_m, sq;
  for (Eigen::Index j = 1; j < n; ++j) {
    inv_m.push_back(1.0 / m[j]);
    sq.push_back(resid[j] * resid[j]);
  }
  const VarianceLaw law = fit_variance_law(inv_m, sq);
  Vector sd(n);
  bool fallback = false;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = law(m[j]);
    if (!(v > 0.0)) fallback = true;
    sd[j] = v > 0.0 ? std::sqrt(v) : 1.0;
  }
  if (fallback) sd.setOnes();
  const Vector normalized = resid.array() / sd.array();

  InferenceResult r;
  r.method = InferenceMethod::crb;
  r.estimate = tau;
  r.replications = options.replications;
  std::vector<double> dist(static_cast<std::size_t>(options.replications));
  const auto nu = static_cast<std::uint32_t>(n);
  for (int b = 0; b < options.replications; ++b) {
    CounterRng rng(options.seed, options.stream, static_cast<std::uint32_t>(b));
    const double treated = normalized[rng.uniform_index(nu)] * sd[0];
    double controls = 0.0;
    for (Eigen::Index j = 1; j < n; ++j) controls += normalized[rng.uniform_index(nu)] * sd[j];
    dist[static_cast<std::size_t>(b)] = treated - controls / static_cast<double>(n0);
  }
  int extreme = 0;
  for (double d : dist)
    if (std::fabs(d) >= std::fabs(tau)) ++extreme;
  r.p_value = static_cast<double>(extreme) / options.replications;
  r.se = stats::stddev(dist);
  r.extras["variance_a"] = law.a;
  r.extras["variance_b"] = law.b;
  if (fallback) r.flags.push_back("negative_fitted_variance");
  r.null_distribution = std::move(dist);
  return r;
}

// ---------------------------------------------------------------------------
// Modified block bootstrap

struct MbbOptions {
  int replications = 300;
  std::uint64_t seed = 0;
  std::uint64_t stream = stream_id(StreamDomain::mbb, 0);
  int max_retries = 1000;
  bool force_original_blocks = false;  // keep every unit exactly once
  int workers = 1;
};

/// Bootstrap core. `cell_means` is the aggregated panel (treated unit in row
/// 0); `treated_cells[t]` holds the treated unit's records for period t, and
/// `treated_shift[t]` is added to every resampled treated cell mean (zero for
/// observed data; the simulation adds its cell-level error this way).
inline InferenceResult block_bootstrap_core(const Matrix& cell_means,
                                            const std::vector<const MicroCell*>& treated_cells,
                                            const Vector& treated_shift, Eigen::Index n_pre,
                                            const MbbOptions& options) {
  if (options.replications < 2) throw Error(Errc::invalid_argument, "replications must be >= 2");
  const auto n = static_cast<std::size_t>(cell_means.rows());
  const Eigen::Index t = cell_means.cols();
  const Eigen::Index post = t - n_pre;
  auto did = [&](const Vector& treated, const Vector& controls) {
    return (treated.tail(post).mean() - treated.head(n_pre).mean()) -
           (controls.tail(post).mean() - controls.head(n_pre).mean());
  };
  const double tau = did(cell_means.row(0).transpose(),
                         cell_means.bottomRows(cell_means.rows() - 1).colwise().mean().transpose());

  std::vector<double> dist(static_cast<std::size_t>(options.replications));
  parallel_for(dist.size(), options.workers, [&](std::size_t b) {
    CounterRng rng(options.seed, options.stream, static_cast<std::uint32_t>(b));
    std::vector<std::size_t> blocks(n);
    for (int tries = 0;; ++tries) {
      if (options.force_original_blocks) {
        for (std::size_t i = 0; i < n; ++i) blocks[i] = i;
      } else {
        for (auto& blk : blocks) blk = rng.uniform_index(static_cast<std::uint32_t>(n));
      }
      const auto treated = std::count(blocks.begin(), blocks.end(), std::size_t{0});
      if (treated > 0 && treated < static_cast<long>(n)) break;
      if (tries >= options.max_retries)
        throw Error(Errc::empty_resampled_cell, "could not draw a block sample with both groups");
    }
    Vector treated_sum = Vector::Zero(t);
    Vector control_sum = Vector::Zero(t);
    int n_treated = 0;
    int n_control = 0;
    for (std::size_t blk : blocks) {
      if (blk != 0) {
        control_sum += cell_means.row(static_cast<Eigen::Index>(blk)).transpose();
        ++n_control;
        continue;
      }
      ++n_treated;
      for (Eigen::Index c = 0; c < t; ++c) {
        const MicroCell& cell = *treated_cells[static_cast<std::size_t>(c)];
        const auto size = static_cast<std::uint32_t>(cell.size());
        double sw = 0.0;
        double sy = 0.0;
        for (int attempt = 0;; ++attempt) {
          sw = 0.0;
          sy = 0.0;
          for (std::uint32_t k = 0; k < size; ++k) {
            const std::uint32_t pick = rng.uniform_index(size);
            sw += cell.weights[pick];
            sy += cell.weights[pick] * cell.outcomes[pick];
          }
          if (sw > 0.0) break;
          if (attempt >= options.max_retries)
            throw Error(Errc::empty_resampled_cell, "resampled treated cell has zero total weight");
        }
        treated_sum[c] += sy / sw + treated_shift[c];
      }
    }
    dist[b] = did(treated_sum / n_treated, control_sum / n_control);
  });

  InferenceResult r;
  r.method = InferenceMethod::mbb;
  r.estimate = tau;
  r.replications = options.replications;
  r.se = stats::stddev(dist);
  r.p_value = detail::wald_p(tau, *r.se, DfMode::normal, 0.0, r.flags);
  r.null_distribution = std::move(dist);
  return r;
}

/// Two-stage bootstrap of the DiD coefficient: draw N unit blocks with
/// replacement; every drawn copy of the treated unit has its records
/// resampled within each unit-period cell; cells are re-aggregated and DiD
/// re-estimated. Draws without the treated unit (or without any control) are
/// redrawn. SE = SD of the bootstrap estimates, p-value from N(0,1).
inline InferenceResult modified_block_bootstrap(const MicroPanel& micro, const MbbOptions& options = {}) {
  const BalancedPanel agg = micro.aggregate();
  std::vector<const MicroCell*> cells;
  for (std::size_t c = 0; c < micro.n_periods(); ++c) cells.push_back(&micro.cell(0, c));
  return block_bootstrap_core(agg.outcomes(), cells, Vector::Zero(agg.n_periods()), agg.n_pre(), options);
}

// ---------------------------------------------------------------------------
// RMSPE ratio

struct RmspeSweep {
  std::vector<double> pre_rmspe;
  std::vector<double> post_rmspe;
  std::vector<double> ratios;
  std::vector<double> p_values;  // rank / N with each unit acting as treated
  std::vector<bool> zero_pre;
};

/// Refits the estimator with every unit acting as treated. Ranks count
/// strictly larger ratios first; tied units are ordered with the lowest index
/// last, so ranks always form a permutation of 1..N.
inline RmspeSweep rmspe_ratio_sweep(const BalancedPanel& panel, const EstimatorConfig& config) {
  const Eigen::Index n = panel.n_units();
  RmspeSweep s;
  const double scale = std::max(1.0, panel.outcomes().cwiseAbs().maxCoeff());
  for (Eigen::Index u = 0; u < n; ++u) {
    std::vector<Eigen::Index> order{u};
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != u) order.push_back(j);
    const EstimateResult fit = estimate(panel.select_units(order), config);
    const double pre = fit.pre_rmspe;
    const double post = detail::rms(fit.effects);
    const bool zero = pre <= 1e-12 * scale;
    double ratio;
    if (zero)
      ratio = post > 1e-12 * scale ? std::numeric_limits<double>::infinity() : 0.0;
    else
      ratio = post / pre;
    s.pre_rmspe.push_back(pre);
    s.post_rmspe.push_back(post);
    s.ratios.push_back(ratio);
    s.zero_pre.push_back(zero);
  }
  for (Eigen::Index u = 0; u < n; ++u) {
    int rank = 1;
    for (Eigen::Index v = 0; v < n; ++v) {
      if (v == u) continue;
      const double rv = s.ratios[static_cast<std::size_t>(v)];
      const double ru = s.ratios[static_cast<std::size_t>(u)];
      if (rv > ru || (rv == ru && v > u)) ++rank;
    }
    s.p_values.push_back(static_cast<double>(rank) / static_cast<double>(n));
  }
  return s;
}

inline InferenceResult rmspe_ratio_test(const BalancedPanel& panel,
                                        EstimatorConfig config = {Method::sc, {}, {}}) {
  const RmspeSweep s = rmspe_ratio_sweep(panel, config);
  InferenceResult r;
  r.method = InferenceMethod::rmspe_ratio;
  r.estimate = estimate(panel, config).tau;
  r.p_value = s.p_values[0];
  r.replications = static_cast<int>(s.ratios.size());
  r.extras["ratio"] = s.ratios[0];
  r.extras["pre_rmspe"] = s.pre_rmspe[0];
  r.extras["post_rmspe"] = s.post_rmspe[0];
  if (s.zero_pre[0]) r.flags.push_back("zero_pre_rmspe");
  r.null_distribution = s.ratios;
  return r;
}

// ---------------------------------------------------------------------------
// Rearrangement

struct RearrangementFit {
  Vector betas;                    // per-unit post coefficients
  double treated_beta = 0.0;       // beta_1 minus the control mean (the DiD)
  double base_p = 1.0;
  std::map<double, double> rho_alpha;
  std::map<double, bool> rejects;  // whether the base test rejects at alpha
};

/// Per-unit regressions y_jt = a_j + beta_j 1{t >= T0} + e give beta_j = post
/// mean minus pre mean. The treated deviation from the control mean is ranked
/// against the control deviations; p(s) = (1 + #{j : s|c_j| >= |d|}) / N.
/// rho_alpha is the largest s >= 1 with p(s) <= alpha, located by bisection
/// to 0.01 (1 when the base test does not reject; infinity when no control
/// varies).
inline RearrangementFit rearrangement_test(const BalancedPanel& panel,
                                           const std::vector<double>& alphas) {
  RearrangementFit fit;
  fit.betas = detail::post_minus_pre(panel.outcomes(), panel.n_pre());
  const Eigen::Index n = panel.n_units();
  const Eigen::Index n0 = panel.n_controls();
  const double control_mean = fit.betas.tail(n0).mean();
  const double d = std::fabs(fit.betas[0] - control_mean);
  fit.treated_beta = fit.betas[0] - control_mean;
  const Vector c = (fit.betas.tail(n0).array() - control_mean).abs();

  auto p_at = [&](double s) {
    int count = 1;
    for (Eigen::Index j = 0; j < n0; ++j)
      if (s * c[j] >= d) ++count;
    return static_cast<double>(count) / static_cast<double>(n);
  };
  fit.base_p = p_at(1.0);
  for (double alpha : alphas) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::invalid_argument, "alpha must be in (0,1)");
    const bool base = fit.base_p <= alpha;
    fit.rejects[alpha] = base;
    if (!base) {
      fit.rho_alpha[alpha] = 1.0;
      continue;
    }
    double lo = 1.0;
    double hi = 2.0;
    while (p_at(hi) <= alpha) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e12) break;
    }
    if (p_at(hi) <= alpha) {
      fit.rho_alpha[alpha] = std::numeric_limits<double>::infinity();
      continue;
    }
    while (hi - lo > 0.01) {
      const double mid = 0.5 * (lo + hi);
      (p_at(mid) <= alpha ? lo : hi) = mid;
    }
    fit.rho_alpha[alpha] = lo;
  }
  return fit;
}

}  // namespace sdid

#endif  // SDID_INFERENCE_HPP

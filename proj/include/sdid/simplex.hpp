#ifndef SDID_SIMPLEX_HPP
#define SDID_SIMPLEX_HPP

// Ridge-penalized least squares over the probability simplex:
//
//   minimize  || c0 * 1 + A w - b ||^2 + penalty * ||w||^2
//   s.t.      w >= 0, sum(w) = 1,   c0 free (or fixed at 0).
//
// Solved by Frank-Wolfe with away steps and exact line search, started from
// uniform weights and stopped on the Frank-Wolfe duality gap.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdid/error.hpp"

namespace sdid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SimplexRidgeProblem {
  Matrix design;  // rows = observations, columns = candidates
  Vector target;
  double penalty = 0.0;
  bool with_intercept = false;
};

struct SolverOptions {
  double tol = 1e-8;  // relative: stop once gap <= tol * (1 + |objective|)
  int max_iter = 10000;
  bool record_trace = false;
};

struct SimplexSolution {
  double intercept = 0.0;
  Vector weights;
  double objective = 0.0;
  double kkt_gap = 0.0;  // Frank-Wolfe duality gap at `weights`
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Thrown by solve() when max_iter is reached first. Carries the best iterate
/// so callers may still accept it.
class NoConvergence : public Error {
 public:
  explicit NoConvergence(SimplexSolution best)
      : Error(Errc::no_convergence,
              "simplex solver stopped at " + std::to_string(best.iterations) +
                  " iterations with duality gap " + std::to_string(best.kkt_gap)),
        best_(std::move(best)) {}
  const SimplexSolution& best() const noexcept { return best_; }

 private:
  SimplexSolution best_;
};

namespace detail {

inline void check_problem(const SimplexRidgeProblem& p, const SolverOptions& opt) {
  if (p.design.cols() < 1) throw Error(Errc::invalid_argument, "design needs at least one column");
  if (p.design.rows() < 1) throw Error(Errc::invalid_argument, "design needs at least one row");
  if (p.target.size() != p.design.rows())
    throw Error(Errc::invalid_argument, "target length must equal design rows");
  if (!p.design.allFinite() || !p.target.allFinite() || !std::isfinite(p.penalty))
    throw Error(Errc::non_finite_input, "simplex problem has non-finite entries");
  if (p.penalty < 0.0) throw Error(Errc::invalid_argument, "penalty must be >= 0");
  if (!(opt.tol > 0.0)) throw Error(Errc::invalid_argument, "tol must be > 0");
}

// Lowest index among the minimal entries.
inline Eigen::Index argmin_first(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

}  // namespace detail

/// Frank-Wolfe solve. Always returns; `converged` says whether the gap test
/// was met within max_iter.
inline SimplexSolution solve_unchecked(const SimplexRidgeProblem& problem,
                                       const SolverOptions& options = {}) {
  detail::check_problem(problem, options);
  const Eigen::Index rows = problem.design.rows();
  const Eigen::Index cols = problem.design.cols();
  const double pen = problem.penalty;

  // A free intercept is profiled out by centering; c0 = mean(b - A w).
  Matrix a = problem.design;
  Vector b = problem.target;
  Eigen::RowVectorXd col_means = Eigen::RowVectorXd::Zero(cols);
  double target_mean = 0.0;
  if (problem.with_intercept) {
    col_means = a.colwise().mean();
    target_mean = b.mean();
    a.rowwise() -= col_means;
    b.array() -= target_mean;
  }

  Vector w = Vector::Constant(cols, 1.0 / static_cast<double>(cols));
  Vector aw = a * w;
  Vector grad(cols);
  SimplexSolution sol;

  auto objective = [&] { return (aw - b).squaredNorm() + pen * w.squaredNorm(); };

  double f = objective();
  if (options.record_trace) sol.objective_trace.push_back(f);
  double gap = 0.0;
  int it = 0;
  for (;; ++it) {
    grad.noalias() = 2.0 * (a.transpose() * (aw - b) + pen * w);
    const double gw = grad.dot(w);
    const Eigen::Index s = detail::argmin_first(grad);
    gap = gw - grad[s];
    if (gap <= options.tol * (1.0 + std::fabs(f))) {
      sol.converged = true;
      break;
    }
    if (it >= options.max_iter) break;

    // Away vertex: largest gradient on the support, lowest index on ties.
    Eigen::Index v = -1;
    for (Eigen::Index i = 0; i < cols; ++i)
      if (w[i] > 0.0 && (v < 0 || grad[i] > grad[v])) v = i;
    const double away_gap = grad[v] - gw;

    Vector ad(rows);
    double slope;       // directional derivative g'd (negative)
    double dir_norm2;   // ||d||^2
    double step_max;
    const bool toward = gap >= away_gap || w[v] >= 1.0;
    if (toward) {
      ad = a.col(s) - aw;
      slope = -gap;
      dir_norm2 = w.squaredNorm() - 2.0 * w[s] + 1.0;
      step_max = 1.0;
    } else {
      ad = aw - a.col(v);
      slope = -away_gap;
      dir_norm2 = w.squaredNorm() - 2.0 * w[v] + 1.0;
      step_max = w[v] / (1.0 - w[v]);
    }
    const double curvature = 2.0 * (ad.squaredNorm() + pen * dir_norm2);
    double step = curvature > 0.0 ? std::min(step_max, -slope / curvature) : step_max;
    if (!(step > 0.0)) break;  // no descent left at machine precision

    if (toward) {
      w *= (1.0 - step);
      w[s] += step;
    } else {
      w *= (1.0 + step);
      w[v] -= step;
      if (step == step_max) w[v] = 0.0;
    }
    for (Eigen::Index i = 0; i < cols; ++i)
      if (w[i] < 0.0) w[i] = 0.0;
    if ((it + 1) % 64 == 0) {
      w /= w.sum();
      aw.noalias() = a * w;
    } else {
      aw += step * ad;
    }
    f = objective();
    if (options.record_trace) sol.objective_trace.push_back(f);
  }

  w /= w.sum();
  aw.noalias() = a * w;
  sol.weights = w;
  sol.objective = objective();
  grad.noalias() = 2.0 * (a.transpose() * (aw - b) + pen * w);
  sol.kkt_gap = std::max(0.0, grad.dot(w) - grad.minCoeff());
  sol.iterations = it;
  sol.intercept = problem.with_intercept ? target_mean - col_means.dot(w) : 0.0;
  return sol;
}

/// Solves and throws NoConvergence (carrying the best iterate) if the gap
/// test was not met.
inline SimplexSolution solve(const SimplexRidgeProblem& problem, const SolverOptions& options = {}) {
  SimplexSolution sol = solve_unchecked(problem, options);
  if (!sol.converged) throw NoConvergence(std::move(sol));
  return sol;
}

/// Objective value of `weights` (intercept profiled out when enabled).
inline double simplex_objective(const SimplexRidgeProblem& problem, const Vector& weights) {
  Vector r = problem.design * weights - problem.target;
  if (problem.with_intercept) r.array() -= r.mean();
  return r.squaredNorm() + problem.penalty * weights.squaredNorm();
}

/// Euclidean projection onto the probability simplex (sort and threshold).
inline Vector project_simplex(const Vector& v) {
  if (v.size() == 0) return v;
  if (!v.allFinite()) throw Error(Errc::non_finite_input, "cannot project non-finite vector");
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

}  // namespace sdid

#endif  // SDID_SIMPLEX_HPP

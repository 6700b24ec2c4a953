#include <gtest/gtest.h>

#include <random>

#include "sdid/simplex.hpp"
#include "support/oracles.hpp"

using sdid::Matrix;
using sdid::SimplexRidgeProblem;
using sdid::Vector;

namespace {

SimplexRidgeProblem random_problem(std::mt19937_64& gen, int rows, int cols) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SimplexRidgeProblem p;
  p.design = oracle::random_matrix(gen, rows, cols, 0.3);
  p.target = oracle::random_matrix(gen, rows, 1, 0.3);
  p.penalty = u(gen) < 0.3 ? 0.0 : 0.2 * u(gen);
  p.with_intercept = u(gen) < 0.5;
  return p;
}

}  // namespace

TEST(Simplex, MatchesKktEnumeration) {
  std::mt19937_64 gen(17);
  sdid::SolverOptions opt;
  opt.tol = 1e-11;
  opt.max_iter = 200000;
  for (int trial = 0; trial < 150; ++trial) {
    const auto p = random_problem(gen, 2 + trial % 7, 1 + trial % 6);
    const auto sol = sdid::solve(p, opt);
    const auto ref = oracle::kkt_enumeration(p);
    ASSERT_TRUE(std::isfinite(ref.value));
    EXPECT_NEAR(sol.objective, ref.value, 1e-9 * (1.0 + ref.value)) << trial;
    EXPECT_NEAR(sdid::simplex_objective(p, sol.weights), sol.objective, 1e-12 * (1.0 + sol.objective));
    EXPECT_NEAR(sol.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(sol.weights.minCoeff(), 0.0);
  }
}

TEST(Simplex, MatchesAcceleratedProjectedGradient) {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = random_problem(gen, 30, 12);
    p.penalty = 0.05;  // strongly convex, so the weights themselves are unique
    sdid::SolverOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 500000;
    const auto sol = sdid::solve(p, opt);
    const Vector w = oracle::fista(p);
    EXPECT_LT((sol.weights - w).lpNorm<Eigen::Infinity>(), 1e-5) << trial;
  }
}

TEST(Simplex, NotWorseThanFineGrid) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_problem(gen, 6, 3);
    const auto sol = sdid::solve(p);
    EXPECT_LE(sol.objective, oracle::grid_search_min(p, 0.01) + 1e-8) << trial;
  }
}

TEST(Simplex, InterceptIsProfiled) {
  std::mt19937_64 gen(3);
  SimplexRidgeProblem p;
  p.design = oracle::random_matrix(gen, 8, 4);
  const Vector w0 = (Vector(4) << 0.1, 0.6, 0.3, 0.0).finished();
  p.target = p.design * w0 + Vector::Constant(8, 7.5);
  p.with_intercept = true;
  sdid::SolverOptions opt;
  opt.tol = 1e-14;
  opt.max_iter = 1000000;
  const auto sol = sdid::solve_unchecked(p, opt);
  EXPECT_NEAR(sol.intercept, 7.5, 1e-5);
  EXPECT_LT((sol.weights - w0).norm(), 1e-5);
}

TEST(Simplex, ObjectiveTraceIsMonotone) {
  std::mt19937_64 gen(8);
  auto p = random_problem(gen, 20, 10);
  sdid::SolverOptions opt;
  opt.record_trace = true;
  const auto sol = sdid::solve(p, opt);
  ASSERT_GE(sol.objective_trace.size(), 2u);
  for (std::size_t i = 1; i < sol.objective_trace.size(); ++i)
    EXPECT_LE(sol.objective_trace[i], sol.objective_trace[i - 1] + 1e-12);
}

TEST(Simplex, SingleColumnIsTrivial) {
  SimplexRidgeProblem p;
  p.design = Matrix::Ones(3, 1);
  p.target = Vector::Zero(3);
  const auto sol = sdid::solve(p);
  EXPECT_DOUBLE_EQ(sol.weights[0], 1.0);
}

TEST(Simplex, IterationCapThrowsWithBestIterate) {
  std::mt19937_64 gen(2);
  auto p = random_problem(gen, 40, 30);
  p.penalty = 0.0;
  sdid::SolverOptions opt;
  opt.max_iter = 2;
  opt.tol = 1e-15;
  try {
    sdid::solve(p, opt);
    FAIL();
  } catch (const sdid::NoConvergence& e) {
    EXPECT_EQ(e.code(), sdid::Errc::no_convergence);
    EXPECT_EQ(e.best().weights.size(), 30);
    EXPECT_NEAR(e.best().weights.sum(), 1.0, 1e-12);
  }
}

TEST(Simplex, RejectsBadInput) {
  SimplexRidgeProblem p;
  p.design = Matrix::Ones(3, 2);
  p.target = Vector::Zero(3);
  p.penalty = -1.0;
  EXPECT_THROW(sdid::solve(p), sdid::Error);
  p.penalty = 0.0;
  p.target = Vector::Zero(2);
  EXPECT_THROW(sdid::solve(p), sdid::Error);
}

TEST(Projection, MatchesBisection) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector v = oracle::random_matrix(gen, 1 + trial % 9, 1, 2.0);
    EXPECT_LT((sdid::project_simplex(v) - oracle::project_bisect(v)).norm(), 1e-10);
  }
}

#include <gtest/gtest.h>

#include <random>

#include "sdid/estimators.hpp"
#include "support/oracles.hpp"

using namespace sdid;

namespace {

SolverOptions tight() {
  SolverOptions s;
  s.tol = 1e-12;
  s.max_iter = 200000;
  return s;
}

}  // namespace

TEST(Did, TwoByTwoByHand) {
  // treated pre 1 post 3, control pre 0 post 1; the pre period and the
  // control are repeated to meet the minimum panel size
  Matrix y(3, 3);
  y << 1, 1, 3,  //
      0, 0, 1,   //
      0, 0, 1;
  EXPECT_DOUBLE_EQ(did_estimate(oracle::make_panel(y, 2)).tau, 1.0);
  Matrix sym(3, 3);
  sym << 1, 2, 5,  //
      0, 1, 4,     //
      2, 3, 6;
  EXPECT_NEAR(did_estimate(oracle::make_panel(sym, 2)).tau, 0.0, 1e-15);
}

TEST(Did, AgreesWithTwoWayFixedEffects) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix y = oracle::random_matrix(gen, 6 + trial % 4, 7, 1.0);
    const auto panel = oracle::make_panel(y, 4);
    const double dense = oracle::dense_twfe_crve(y, 4, 0.0).tau;
    EXPECT_NEAR(did_estimate(panel).tau, dense, 1e-10);
    EXPECT_NEAR(regression::twfe_did(y, 4).tau, dense, 1e-10);
  }
}

TEST(Sdid, DoubleDifferenceEqualsWeightedRegression) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix y = oracle::additive_panel(gen, 9, 8, 5, 1.0, 0.8);
    const auto panel = oracle::make_panel(y, 5);
    SdidOptions o;
    o.solver = tight();
    const auto r = sdid_estimate(panel, o, true);
    const auto& w = *r.weights;
    Vector unit_w(9), time_w(8);
    unit_w << 1.0, w.unit_weights;
    time_w << w.time_weights, Vector::Constant(3, 1.0 / 3.0);
    EXPECT_NEAR(r.tau, oracle::weighted_twfe_tau(y, 5, unit_w, time_w), 1e-10) << trial;
    EXPECT_NEAR(r.diagnostics.at("tau_regression"), r.tau, 1e-10);
  }
}

TEST(Sdid, UniformWeightsReduceToDid) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto panel = oracle::make_panel(oracle::random_matrix(gen, 7, 6), 4);
    WeightSet w;
    w.unit_weights = Vector::Constant(6, 1.0 / 6.0);
    w.time_weights = Vector::Constant(4, 0.25);
    EXPECT_NEAR(sdid_tau(panel, w), did_estimate(panel).tau, 1e-12);
  }
}

TEST(Sdid, ZetaFromFirstDifferences) {
  Matrix y(3, 4);
  y << 0, 0, 0, 0,  //
      0, 1, 3, 0,   //
      0, 2, 2, 0;
  const auto reg = compute_zeta(oracle::make_panel(y, 3));
  // control first differences 1, 2, 2, 0: sd (ddof 1) = sqrt(11/12)
  EXPECT_NEAR(reg.sigma, std::sqrt(11.0 / 12.0), 1e-15);
  EXPECT_NEAR(reg.zeta, reg.sigma, 1e-15);  // one post period
  EXPECT_NEAR(reg.xi, 1e-6 * reg.sigma, 1e-20);
}

TEST(Sdid, ConstantControlsAreFlagged) {
  Matrix y = Matrix::Ones(4, 5);
  y(0, 4) = 3.0;
  const auto r = sdid_estimate(oracle::make_panel(y, 3));
  EXPECT_NEAR(r.tau, 1.0, 1e-12);  // mean of the post gaps 0 and 2
  EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "zero_variance"), r.flags.end());
}

TEST(Estimators, NoiselessAdditiveEffectIsRecovered) {
  std::mt19937_64 gen(4);
  for (double tau : {-2.0, 0.0, 3.5}) {
    const auto panel = oracle::make_panel(oracle::additive_panel(gen, 12, 10, 6, tau, 0.0), 6);
    EXPECT_NEAR(did_estimate(panel).tau, tau, 1e-10);
    EXPECT_NEAR(sdid_estimate(panel).tau, tau, 1e-10);
  }
}

TEST(Estimators, InvariantToUnitAndPeriodShifts) {
  std::mt19937_64 gen(5);
  const Matrix y = oracle::random_matrix(gen, 8, 7);
  Matrix shifted = y;
  for (Eigen::Index i = 0; i < 8; ++i) shifted.row(i).array() += 3.0 * i - 4.0;
  for (Eigen::Index c = 0; c < 7; ++c) shifted.col(c).array() += 0.7 * c * c;
  const auto a = oracle::make_panel(y, 4);
  const auto b = oracle::make_panel(shifted, 4);
  // zeta is held fixed: period shifts change the first differences it is
  // computed from
  SdidOptions o;
  o.solver = tight();
  o.zeta = 0.3;
  o.xi = 1e-4;
  EXPECT_NEAR(did_estimate(a).tau, did_estimate(b).tau, 1e-10);
  EXPECT_NEAR(sdid_estimate(a, o).tau, sdid_estimate(b, o).tau, 1e-7);
}

TEST(Sc, ExactConvexCombinationHasZeroPreFit) {
  std::mt19937_64 gen(6);
  Matrix y = oracle::random_matrix(gen, 6, 9);
  y.row(0) = 0.2 * y.row(1) + 0.5 * y.row(3) + 0.3 * y.row(5);
  y.row(0).tail(3).array() += 1.25;
  const auto r = sc_estimate(oracle::make_panel(y, 6), tight());
  EXPECT_LT(r.pre_rmspe, 1e-6);
  EXPECT_NEAR(r.tau, 1.25, 1e-5);
  EXPECT_NEAR(r.weights->unit_weights.sum(), 1.0, 1e-12);
}

TEST(Covariates, BetaMatchesDenseRegressionWithoutTreatedCells) {
  std::mt19937_64 gen(7);
  const Eigen::Index n = 7, t = 6, pre = 4;
  CovariateBlock cov;
  cov.names = {"x1", "x2"};
  cov.values = {oracle::random_matrix(gen, n, t), oracle::random_matrix(gen, n, t)};
  Matrix y = oracle::additive_panel(gen, n, t, pre, 2.0, 0.3);
  y += 1.5 * cov.values[0] - 0.5 * cov.values[1];
  const auto panel = oracle::make_panel(y, pre, std::nullopt, cov);
  const auto adj = adjust_covariates(panel);

  // Oracle: all cells, full dummies, one dummy per treated cell.
  Matrix x = oracle::twfe_design(n, t, pre, cov.values);
  Matrix full(x.rows(), x.cols() + (t - pre) - 1);
  full << x.leftCols(n + t - 1), x.rightCols(2), Matrix::Zero(x.rows(), t - pre);
  for (Eigen::Index c = pre; c < t; ++c) full(c, n + t - 1 + 2 + (c - pre)) = 1.0;
  const Vector beta = full.colPivHouseholderQr().solve(oracle::stack_rows(y));
  EXPECT_NEAR(adj.beta[0], beta[n + t - 1], 1e-10);
  EXPECT_NEAR(adj.beta[1], beta[n + t], 1e-10);
  EXPECT_NEAR((adj.panel.outcomes() - (y - adj.beta[0] * cov.values[0] - adj.beta[1] * cov.values[1])).norm(), 0.0, 1e-12);
}

TEST(Covariates, CollinearColumnIsNamed) {
  std::mt19937_64 gen(8);
  CovariateBlock cov;
  const Matrix x = oracle::random_matrix(gen, 5, 5);
  cov.names = {"a", "b"};
  cov.values = {x, 2.0 * x};
  const auto panel = oracle::make_panel(oracle::random_matrix(gen, 5, 5), 3, std::nullopt, cov);
  try {
    adjust_covariates(panel);
    FAIL();
  } catch (const RankDeficientDesign& e) {
    ASSERT_FALSE(e.columns().empty());
    EXPECT_EQ(e.columns().back(), "b");
  }
}

TEST(BiasCorrectedSc, MatchesSvdRidgeOracle) {
  std::mt19937_64 gen(9);
  const Matrix y = oracle::random_matrix(gen, 10, 8);
  const auto panel = oracle::make_panel(y, 5);
  BiasCorrectionOptions o;
  o.ridge_penalty = 0.3;
  o.solver = tight();
  const auto r = bias_corrected_sc(panel, o);
  const Vector& w = r.weights->unit_weights;
  const Matrix xc = y.bottomRows(9).leftCols(5);
  for (Eigen::Index t = 0; t < 8; ++t) {
    const auto fit = oracle::svd_ridge(xc, y.col(t).tail(9), 0.3);
    double gap = y(0, t) - fit(y.row(0).head(5).transpose());
    for (Eigen::Index j = 0; j < 9; ++j) gap -= w[j] * (y(j + 1, t) - fit(xc.row(j).transpose()));
    const double got = t < 5 ? r.pre_gaps[t] : r.effects[t - 5];
    EXPECT_NEAR(got, gap, 1e-9) << t;
  }
}

TEST(BiasCorrectedSc, ZeroRegressionIsPlainSc) {
  std::mt19937_64 gen(10);
  const auto panel = oracle::make_panel(oracle::random_matrix(gen, 8, 7), 4);
  BiasCorrectionOptions o;
  o.zero_regression = true;
  EXPECT_NEAR(bias_corrected_sc(panel, o).tau, sc_estimate(panel).tau, 1e-14);
}

TEST(BiasCorrectedSc, ExactLinearFactorModel) {
  // Outcomes linear in the pre-period vector: the correction is exact.
  std::mt19937_64 gen(11);
  const Eigen::Index n = 12, pre = 4, post = 3;
  Matrix y(n, pre + post);
  y.leftCols(pre) = oracle::random_matrix(gen, n, pre);
  const Matrix coef = oracle::random_matrix(gen, pre, post);
  y.rightCols(post) = y.leftCols(pre) * coef;
  y.rightCols(post).array() += 0.4;
  y.row(0).tail(post).array() += 2.0;
  BiasCorrectionOptions o;
  o.ridge_penalty = 0.0;
  const auto r = bias_corrected_sc(oracle::make_panel(y, pre), o);
  EXPECT_LT(r.pre_gaps.lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_NEAR(r.tau, 2.0, 1e-8);
}

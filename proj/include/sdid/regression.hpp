#ifndef SDID_REGRESSION_HPP
#define SDID_REGRESSION_HPP

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdid/error.hpp"

namespace sdid::regression {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Least squares with a rank check; names the columns found collinear with
/// the ones before them.
inline Vector least_squares(const Matrix& x, const Vector& y,
                            const std::vector<std::string>& names = {}) {
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    std::vector<std::string> bad;
    // Walk columns left to right and report each one that adds no rank.
    Eigen::Index kept = 0;
    Matrix basis(x.rows(), 0);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Matrix trial(x.rows(), kept + 1);
      trial << basis, x.col(c);
      Eigen::ColPivHouseholderQR<Matrix> q(trial);
      q.setThreshold(1e-10);
      if (q.rank() > kept) {
        basis = std::move(trial);
        ++kept;
      } else {
        bad.push_back(c < static_cast<Eigen::Index>(names.size())
                          ? names[static_cast<std::size_t>(c)]
                          : "column " + std::to_string(c));
      }
    }
    std::string list;
    for (const auto& b : bad) list += (list.empty() ? "" : ", ") + b;
    throw RankDeficientDesign(bad, "collinear design columns: " + list);
  }
  return qr.solve(y);
}

/// Ridge regression with an unpenalized intercept. With penalty 0 the
/// minimum-norm least-squares solution is used, and `ill_conditioned` is set
/// when the centered design is rank deficient.
struct RidgeFit {
  double intercept = 0.0;
  Vector slope;
  bool ill_conditioned = false;

  double predict(const Eigen::Ref<const Vector>& x) const { return intercept + slope.dot(x); }
};

inline RidgeFit ridge_with_intercept(const Matrix& x, const Vector& y, double penalty) {
  RidgeFit fit;
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const double ym = y.mean();
  Matrix xc = x.rowwise() - xm;
  Vector yc = y.array() - ym;
  if (penalty > 0.0) {
    Matrix gram = xc.transpose() * xc;
    gram.diagonal().array() += penalty;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw Error(Errc::singular_gram, "ridge Gram matrix is not positive definite");
    fit.slope = ldlt.solve(xc.transpose() * yc);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xc);
    cod.setThreshold(1e-12);
    fit.ill_conditioned = cod.rank() < xc.cols();
    fit.slope = cod.solve(yc);
  }
  fit.intercept = ym - xm.dot(fit.slope);
  return fit;
}

/// Two-way fixed-effects DiD coefficient on a balanced panel with one treated
/// unit (row 0) and block treatment from column `n_pre`, by partialling out
/// unit and period means (Frisch-Waugh-Lovell).
struct TwfeFit {
  double tau = 0.0;
  Matrix residuals;       // y - fitted, unit x period
  Matrix treatment_dm;    // two-way demeaned D
  double treatment_ss = 0.0;
};

inline Matrix two_way_demean(const Matrix& m) {
  const Vector row_means = m.rowwise().mean();
  const Eigen::RowVectorXd col_means = m.colwise().mean();
  const double grand = m.mean();
  Matrix out = m;
  out.colwise() -= row_means;
  out.rowwise() -= col_means;
  out.array() += grand;
  return out;
}

inline TwfeFit twfe_did(const Matrix& y, Eigen::Index n_pre) {
  Matrix d = Matrix::Zero(y.rows(), y.cols());
  d.row(0).tail(y.cols() - n_pre).setOnes();
  TwfeFit fit;
  fit.treatment_dm = two_way_demean(d);
  const Matrix y_dm = two_way_demean(y);
  fit.treatment_ss = fit.treatment_dm.squaredNorm();
  if (!(fit.treatment_ss > 0.0)) throw Error(Errc::singular_gram, "treatment has no variation");
  fit.tau = (fit.treatment_dm.array() * y_dm.array()).sum() / fit.treatment_ss;
  fit.residuals = y_dm - fit.tau * fit.treatment_dm;
  return fit;
}

}  // namespace sdid::regression

#endif  // SDID_REGRESSION_HPP

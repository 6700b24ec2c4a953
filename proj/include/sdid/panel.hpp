#ifndef SDID_PANEL_HPP
#define SDID_PANEL_HPP

// Balanced unit-by-time panels with a single treated unit, plus the
// micro-record layer they are aggregated from.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdid/error.hpp"
#include "sdid/stats.hpp"

namespace sdid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One individual observation.
struct MicroRecord {
  std::string unit;
  int time = 0;
  double sampling_weight = 1.0;
  double outcome = 0.0;
  std::map<std::string, double> covariates;
};

/// One row of an aggregate (unit, time, value[, count]) table.
struct LongRecord {
  std::string unit;
  int time = 0;
  double value = 0.0;
  std::optional<double> count;
  std::vector<double> covariates;  // aligned with the panel's covariate names
};

/// Per-cell covariate matrices, one N x T matrix per named covariate.
struct CovariateBlock {
  std::vector<std::string> names;
  std::vector<Matrix> values;

  bool empty() const { return names.empty(); }
};

namespace detail {

inline std::string format_cells(const std::vector<CellRef>& cells, std::size_t limit = 20) {
  std::ostringstream out;
  for (std::size_t i = 0; i < cells.size() && i < limit; ++i) {
    if (i) out << ", ";
    out << "(" << cells[i].unit << "," << cells[i].time << ")";
  }
  if (cells.size() > limit) out << ", ... (" << cells.size() << " total)";
  return out.str();
}

}  // namespace detail

/// Immutable unit x time outcome matrix. Row 0 is always the treated unit;
/// the treated cells are row 0 at every period t >= treatment_start.
class BalancedPanel {
 public:
  BalancedPanel(std::vector<std::string> units, std::vector<int> times, Matrix outcomes,
                int treatment_start, std::optional<Matrix> cell_counts = std::nullopt,
                CovariateBlock covariates = {})
      : units_(std::move(units)),
        times_(std::move(times)),
        y_(std::move(outcomes)),
        treatment_start_(treatment_start),
        counts_(std::move(cell_counts)),
        covariates_(std::move(covariates)) {
    validate();
  }

  const std::vector<std::string>& units() const { return units_; }
  const std::vector<int>& times() const { return times_; }
  const Matrix& outcomes() const { return y_; }
  int treatment_start() const { return treatment_start_; }
  const std::optional<Matrix>& cell_counts() const { return counts_; }
  const CovariateBlock& covariates() const { return covariates_; }
  bool has_covariates() const { return !covariates_.empty(); }

  Eigen::Index n_units() const { return y_.rows(); }
  Eigen::Index n_controls() const { return y_.rows() - 1; }
  Eigen::Index n_periods() const { return y_.cols(); }
  Eigen::Index n_pre() const { return n_pre_; }
  Eigen::Index n_post() const { return y_.cols() - n_pre_; }

  /// Block assignment indicator D_jt.
  bool treated(Eigen::Index unit, Eigen::Index period) const {
    return unit == 0 && period >= n_pre_;
  }

  /// Same structure, new outcomes.
  BalancedPanel with_outcomes(Matrix outcomes) const {
    return BalancedPanel(units_, times_, std::move(outcomes), treatment_start_, counts_,
                         covariates_);
  }

  /// Rows reordered as `order` (order[0] becomes the treated unit). Used for
  /// placebo assignments and control permutations; rows may be dropped.
  BalancedPanel select_units(const std::vector<Eigen::Index>& order) const {
    std::vector<std::string> units;
    Matrix y(static_cast<Eigen::Index>(order.size()), y_.cols());
    std::optional<Matrix> counts;
    if (counts_) counts = Matrix(y.rows(), y.cols());
    CovariateBlock cov;
    cov.names = covariates_.names;
    cov.values.assign(covariates_.values.size(), Matrix(y.rows(), y.cols()));
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      units.push_back(units_.at(static_cast<std::size_t>(order[i])));
      y.row(r) = y_.row(order[i]);
      if (counts) counts->row(r) = counts_->row(order[i]);
      for (std::size_t k = 0; k < cov.values.size(); ++k)
        cov.values[k].row(r) = covariates_.values[k].row(order[i]);
    }
    return BalancedPanel(std::move(units), times_, std::move(y), treatment_start_,
                         std::move(counts), std::move(cov));
  }

  /// Panel without the treated unit, with control `control` (1-based row
  /// index in this panel) acting as the treated unit.
  BalancedPanel placebo(Eigen::Index control) const {
    std::vector<Eigen::Index> order{control};
    for (Eigen::Index j = 1; j < n_units(); ++j)
      if (j != control) order.push_back(j);
    return select_units(order);
  }

 private:
  void validate() {
    const auto n = static_cast<Eigen::Index>(units_.size());
    const auto t = static_cast<Eigen::Index>(times_.size());
    if (y_.rows() != n || y_.cols() != t)
      throw Error(Errc::invalid_argument, "outcome matrix shape does not match units x times");
    if (std::set<std::string>(units_.begin(), units_.end()).size() != units_.size())
      throw Error(Errc::invalid_argument, "unit labels must be unique");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (times_[i] <= times_[i - 1])
        throw Error(Errc::invalid_argument, "periods must be strictly increasing");
    if (!y_.allFinite()) throw Error(Errc::non_finite_input, "outcomes must be finite");
    n_pre_ = static_cast<Eigen::Index>(
        std::lower_bound(times_.begin(), times_.end(), treatment_start_) - times_.begin());
    if (n < 3)
      throw Error(Errc::degenerate_panel, "need the treated unit and at least 2 controls, got " +
                                              std::to_string(n) + " units");
    if (n_pre_ < 2)
      throw Error(Errc::degenerate_panel, "need at least 2 pre-treatment periods before " +
                                              std::to_string(treatment_start_));
    if (t - n_pre_ < 1)
      throw Error(Errc::degenerate_panel, "need at least 1 post-treatment period at or after " +
                                              std::to_string(treatment_start_));
    if (counts_) {
      if (counts_->rows() != n || counts_->cols() != t)
        throw Error(Errc::invalid_argument, "cell_counts shape does not match outcomes");
      if (!((counts_->array() > 0.0).all()))
        throw Error(Errc::invalid_argument, "cell_counts must be positive");
    }
    if (covariates_.names.size() != covariates_.values.size())
      throw Error(Errc::invalid_argument, "covariate names and matrices differ in count");
    for (const auto& m : covariates_.values) {
      if (m.rows() != n || m.cols() != t)
        throw Error(Errc::invalid_argument, "covariate matrix shape does not match outcomes");
      if (!m.allFinite()) throw Error(Errc::non_finite_input, "covariates must be finite");
    }
  }

  std::vector<std::string> units_;
  std::vector<int> times_;
  Matrix y_;
  int treatment_start_;
  std::optional<Matrix> counts_;
  CovariateBlock covariates_;
  Eigen::Index n_pre_ = 0;
};

/// Column partition of the outcomes at the treatment start.
inline std::pair<Matrix, Matrix> split_pre_post(const BalancedPanel& panel) {
  const Matrix& y = panel.outcomes();
  return {y.leftCols(panel.n_pre()), y.rightCols(panel.n_post())};
}

namespace detail {

struct CellIndex {
  std::vector<std::string> units;  // treated first, then first-appearance order
  std::vector<int> times;          // sorted ascending
  std::unordered_map<std::string, Eigen::Index> unit_row;
  std::map<int, Eigen::Index> time_col;
};

template <class Rows, class UnitOf, class TimeOf>
CellIndex index_cells(const Rows& rows, const std::string& treated_unit, UnitOf unit_of,
                      TimeOf time_of) {
  CellIndex idx;
  std::set<int> times;
  bool saw_treated = false;
  idx.units.push_back(treated_unit);
  for (const auto& r : rows) {
    const std::string& u = unit_of(r);
    times.insert(time_of(r));
    if (u == treated_unit) {
      saw_treated = true;
    } else if (!idx.unit_row.contains(u)) {
      idx.unit_row.emplace(u, 0);
      idx.units.push_back(u);
    }
  }
  if (!saw_treated)
    throw Error(Errc::unknown_treated_unit, "treated unit '" + treated_unit + "' not in input");
  idx.unit_row.clear();
  for (std::size_t i = 0; i < idx.units.size(); ++i)
    idx.unit_row[idx.units[i]] = static_cast<Eigen::Index>(i);
  idx.times.assign(times.begin(), times.end());
  for (std::size_t i = 0; i < idx.times.size(); ++i)
    idx.time_col[idx.times[i]] = static_cast<Eigen::Index>(i);
  return idx;
}

inline std::vector<CellRef> missing_cells(const CellIndex& idx,
                                          const Eigen::Array<bool, -1, -1>& seen) {
  std::vector<CellRef> missing;
  for (Eigen::Index i = 0; i < seen.rows(); ++i)
    for (Eigen::Index t = 0; t < seen.cols(); ++t)
      if (!seen(i, t))
        missing.push_back({idx.units[static_cast<std::size_t>(i)],
                           idx.times[static_cast<std::size_t>(t)]});
  return missing;
}

}  // namespace detail

/// Builds a panel from aggregate rows. Every (unit, time) pair must appear
/// exactly once; the treated unit is moved to row 0 and periods are sorted.
inline BalancedPanel from_long(const std::vector<LongRecord>& records,
                               const std::string& treated_unit, int treatment_start,
                               const std::vector<std::string>& covariate_names = {}) {
  const auto idx = detail::index_cells(
      records, treated_unit, [](const LongRecord& r) -> const std::string& { return r.unit; },
      [](const LongRecord& r) { return r.time; });
  const auto n = static_cast<Eigen::Index>(idx.units.size());
  const auto t = static_cast<Eigen::Index>(idx.times.size());
  Matrix y = Matrix::Zero(n, t);
  Matrix counts = Matrix::Zero(n, t);
  CovariateBlock cov;
  cov.names = covariate_names;
  cov.values.assign(covariate_names.size(), Matrix::Zero(n, t));
  Eigen::Array<bool, -1, -1> seen = Eigen::Array<bool, -1, -1>::Constant(n, t, false);
  bool any_count = false;
  bool all_count = true;
  std::vector<CellRef> duplicates;
  for (const auto& r : records) {
    const Eigen::Index i = idx.unit_row.at(r.unit);
    const Eigen::Index c = idx.time_col.at(r.time);
    if (seen(i, c)) {
      duplicates.push_back({r.unit, r.time});
      continue;
    }
    seen(i, c) = true;
    y(i, c) = r.value;
    if (r.count) {
      any_count = true;
      counts(i, c) = *r.count;
    } else {
      all_count = false;
    }
    if (r.covariates.size() != covariate_names.size())
      throw Error(Errc::invalid_argument, "row (" + r.unit + "," + std::to_string(r.time) +
                                              ") has the wrong number of covariates");
    for (std::size_t k = 0; k < covariate_names.size(); ++k) cov.values[k](i, c) = r.covariates[k];
  }
  if (!duplicates.empty())
    throw CellError(Errc::duplicate_cell, duplicates,
                    "duplicate cells: " + detail::format_cells(duplicates));
  if (auto missing = detail::missing_cells(idx, seen); !missing.empty())
    throw CellError(Errc::missing_cell, missing,
                    "unbalanced panel, missing cells: " + detail::format_cells(missing));
  std::optional<Matrix> cell_counts;
  if (any_count) {
    if (!all_count) throw Error(Errc::invalid_argument, "count given for some cells but not all");
    cell_counts = std::move(counts);
  }
  return BalancedPanel(idx.units, idx.times, std::move(y), treatment_start,
                       std::move(cell_counts), std::move(cov));
}

/// Inverse of from_long: one row per cell, treated unit first.
inline std::vector<LongRecord> to_long(const BalancedPanel& panel) {
  std::vector<LongRecord> out;
  for (Eigen::Index i = 0; i < panel.n_units(); ++i) {
    for (Eigen::Index t = 0; t < panel.n_periods(); ++t) {
      LongRecord r;
      r.unit = panel.units()[static_cast<std::size_t>(i)];
      r.time = panel.times()[static_cast<std::size_t>(t)];
      r.value = panel.outcomes()(i, t);
      if (panel.cell_counts()) r.count = (*panel.cell_counts())(i, t);
      for (const auto& m : panel.covariates().values) r.covariates.push_back(m(i, t));
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// Records of one (unit, time) cell, stored column-wise.
struct MicroCell {
  std::vector<double> weights;
  std::vector<double> outcomes;
  std::vector<double> covariates;  // record-major, n_covariates values per record

  std::size_t size() const { return outcomes.size(); }
};

/// Micro records grouped into a balanced grid of cells; row 0 is the treated
/// unit. This is the input of the block bootstrap and of quantile regression.
class MicroPanel {
 public:
  MicroPanel(std::vector<std::string> units, std::vector<int> times, int treatment_start,
             std::vector<std::string> covariate_names, std::vector<MicroCell> cells)
      : units_(std::move(units)),
        times_(std::move(times)),
        treatment_start_(treatment_start),
        covariate_names_(std::move(covariate_names)),
        cells_(std::move(cells)) {
    if (cells_.size() != units_.size() * times_.size())
      throw Error(Errc::invalid_argument, "cell grid does not match units x times");
    n_pre_ = static_cast<std::size_t>(
        std::lower_bound(times_.begin(), times_.end(), treatment_start_) - times_.begin());
    std::vector<CellRef> empty;
    std::vector<CellRef> zero;
    for (std::size_t i = 0; i < units_.size(); ++i) {
      for (std::size_t t = 0; t < times_.size(); ++t) {
        const MicroCell& c = cell(i, t);
        if (c.size() == 0) {
          empty.push_back({units_[i], times_[t]});
          continue;
        }
        double w = 0.0;
        for (double v : c.weights) {
          if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(Errc::invalid_argument, "sampling weights must be finite and >= 0");
          w += v;
        }
        if (!(w > 0.0)) zero.push_back({units_[i], times_[t]});
        for (double v : c.outcomes)
          if (!std::isfinite(v)) throw Error(Errc::non_finite_input, "outcome must be finite");
      }
    }
    if (!empty.empty())
      throw CellError(Errc::empty_cell, empty, "cells without records: " + detail::format_cells(empty));
    if (!zero.empty())
      throw CellError(Errc::zero_weight_cell, zero,
                      "cells with zero total weight: " + detail::format_cells(zero));
  }

  /// Groups records by (unit, time).
  static MicroPanel from_records(const std::vector<MicroRecord>& records,
                                 const std::string& treated_unit, int treatment_start) {
    const auto idx = detail::index_cells(
        records, treated_unit, [](const MicroRecord& r) -> const std::string& { return r.unit; },
        [](const MicroRecord& r) { return r.time; });
    std::vector<std::string> names;
    if (!records.empty())
      for (const auto& [k, v] : records.front().covariates) names.push_back(k);
    const std::size_t t = idx.times.size();
    std::vector<MicroCell> cells(idx.units.size() * t);
    for (const auto& r : records) {
      if (r.covariates.size() != names.size())
        throw Error(Errc::invalid_argument, "records disagree on covariate names");
      const auto i = static_cast<std::size_t>(idx.unit_row.at(r.unit));
      const auto c = static_cast<std::size_t>(idx.time_col.at(r.time));
      MicroCell& cell = cells[i * t + c];
      cell.weights.push_back(r.sampling_weight);
      cell.outcomes.push_back(r.outcome);
      std::size_t k = 0;
      for (const auto& [name, value] : r.covariates) {
        if (name != names[k++])
          throw Error(Errc::invalid_argument, "records disagree on covariate names");
        cell.covariates.push_back(value);
      }
    }
    return MicroPanel(idx.units, idx.times, treatment_start, std::move(names), std::move(cells));
  }

  const std::vector<std::string>& units() const { return units_; }
  const std::vector<int>& times() const { return times_; }
  int treatment_start() const { return treatment_start_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  std::size_t n_units() const { return units_.size(); }
  std::size_t n_periods() const { return times_.size(); }
  std::size_t n_pre() const { return n_pre_; }
  std::size_t n_covariates() const { return covariate_names_.size(); }

  const MicroCell& cell(std::size_t unit, std::size_t period) const {
    return cells_[unit * times_.size() + period];
  }
  MicroCell& cell(std::size_t unit, std::size_t period) {
    return cells_[unit * times_.size() + period];
  }

  std::size_t n_records() const {
    std::size_t n = 0;
    for (const auto& c : cells_) n += c.size();
    return n;
  }

  /// Weighted cell means of outcomes and covariates; counts are record counts.
  BalancedPanel aggregate() const {
    const auto n = static_cast<Eigen::Index>(units_.size());
    const auto t = static_cast<Eigen::Index>(times_.size());
    const std::size_t k = covariate_names_.size();
    Matrix y(n, t);
    Matrix counts(n, t);
    CovariateBlock cov;
    cov.names = covariate_names_;
    cov.values.assign(k, Matrix(n, t));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < t; ++c) {
        const MicroCell& cell = this->cell(static_cast<std::size_t>(i), static_cast<std::size_t>(c));
        double sw = 0.0;
        double sy = 0.0;
        std::vector<double> sx(k, 0.0);
        for (std::size_t r = 0; r < cell.size(); ++r) {
          const double w = cell.weights[r];
          sw += w;
          sy += w * cell.outcomes[r];
          for (std::size_t j = 0; j < k; ++j) sx[j] += w * cell.covariates[r * k + j];
        }
        y(i, c) = sy / sw;
        counts(i, c) = static_cast<double>(cell.size());
        for (std::size_t j = 0; j < k; ++j) cov.values[j](i, c) = sx[j] / sw;
      }
    }
    return BalancedPanel(units_, times_, std::move(y), treatment_start_, std::move(counts),
                         std::move(cov));
  }

 private:
  std::vector<std::string> units_;
  std::vector<int> times_;
  int treatment_start_;
  std::vector<std::string> covariate_names_;
  std::vector<MicroCell> cells_;
  std::size_t n_pre_ = 0;
};

/// Weighted cell means sum(w y) / sum(w) of micro records.
inline BalancedPanel aggregate_micro(const std::vector<MicroRecord>& records,
                                     const std::string& treated_unit, int treatment_start) {
  return MicroPanel::from_records(records, treated_unit, treatment_start).aggregate();
}

/// Drops records whose outcome lies strictly below the `fraction` quantile or
/// strictly above the 1 - `fraction` quantile of the pooled outcomes.
inline std::vector<MicroRecord> trim_tails(std::vector<MicroRecord> records, double fraction) {
  if (!(fraction >= 0.0 && fraction < 0.5))
    throw Error(Errc::invalid_argument, "trim fraction must be in [0, 0.5)");
  if (fraction == 0.0 || records.empty()) return records;
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(r.outcome);
  std::sort(y.begin(), y.end());
  const double lo = stats::quantile_sorted(y, fraction);
  const double hi = stats::quantile_sorted(y, 1.0 - fraction);
  std::erase_if(records, [&](const MicroRecord& r) { return r.outcome < lo || r.outcome > hi; });
  return records;
}

}  // namespace sdid

#endif  // SDID_PANEL_HPP

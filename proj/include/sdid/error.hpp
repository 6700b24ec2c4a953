#ifndef SDID_ERROR_HPP
#define SDID_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdid {

enum class Errc {
  invalid_argument,
  missing_cell,
  duplicate_cell,
  unknown_treated_unit,
  degenerate_panel,
  empty_cell,
  zero_weight_cell,
  non_finite_input,
  no_convergence,
  solver_failure,
  rank_deficient_design,
  singular_gram,
  too_few_controls,
  degenerate_density,
  empty_resampled_cell,
  io,
  config_parse,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::missing_cell: return "MissingCell";
    case Errc::duplicate_cell: return "DuplicateCell";
    case Errc::unknown_treated_unit: return "UnknownTreatedUnit";
    case Errc::degenerate_panel: return "DegeneratePanel";
    case Errc::empty_cell: return "EmptyCell";
    case Errc::zero_weight_cell: return "ZeroWeightCell";
    case Errc::non_finite_input: return "NonFiniteInput";
    case Errc::no_convergence: return "NoConvergence";
    case Errc::solver_failure: return "SolverFailure";
    case Errc::rank_deficient_design: return "RankDeficientDesign";
    case Errc::singular_gram: return "SingularGram";
    case Errc::too_few_controls: return "TooFewControls";
    case Errc::degenerate_density: return "DegenerateDensity";
    case Errc::empty_resampled_cell: return "EmptyResampledCell";
    case Errc::io: return "Io";
    case Errc::config_parse: return "ConfigParse";
  }
  return "Unknown";
}

/// Base error for everything the library throws. `code()` identifies the
/// failure class; the message carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// A (unit, time) cell reference used in balance diagnostics.
struct CellRef {
  std::string unit;
  int time = 0;
  bool operator==(const CellRef&) const = default;
};

class CellError : public Error {
 public:
  CellError(Errc code, std::vector<CellRef> cells, const std::string& what)
      : Error(code, what), cells_(std::move(cells)) {}
  const std::vector<CellRef>& cells() const noexcept { return cells_; }

 private:
  std::vector<CellRef> cells_;
};

class RankDeficientDesign : public Error {
 public:
  RankDeficientDesign(std::vector<std::string> columns, const std::string& what)
      : Error(Errc::rank_deficient_design, what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

}  // namespace sdid

#endif  // SDID_ERROR_HPP

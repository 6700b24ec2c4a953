#ifndef SDID_IO_HPP
#define SDID_IO_HPP

// CSV formats. Lines starting with '#' are comments; the first other line is
// the header.
//   micro:     unit,time,outcome[,weight][,covariate...]
//   aggregate: unit,time,value[,count][,covariate...]
// Written files begin with "# format_version=1"; aggregate files also carry
// "# treated=<unit>" and "# treatment_start=<time>".

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdid/error.hpp"
#include "sdid/panel.hpp"

namespace sdid::io {

inline constexpr int kFormatVersion = 1;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
  std::map<std::string, std::string> meta;  // from "# key=value" comments
};

namespace detail {

inline std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(strip(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string at_line(const std::string& path, int line) {
  return path + ":" + std::to_string(line) + ": ";
}

inline double parse_double(const std::string& s, const std::string& where, const std::string& col) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    throw Error(Errc::invalid_argument, where + "column '" + col + "': not a number: '" + s + "'");
  if (!std::isfinite(v))
    throw Error(Errc::non_finite_input, where + "column '" + col + "': non-finite value");
  return v;
}

inline int parse_int(const std::string& s, const std::string& where, const std::string& col) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    throw Error(Errc::invalid_argument, where + "column '" + col + "': not an integer: '" + s + "'");
  return v;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  CsvTable t;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos)
        t.meta[detail::strip(line.substr(1, eq - 1))] = detail::strip(line.substr(eq + 1));
      continue;
    }
    auto fields = detail::split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw Error(Errc::invalid_argument, detail::at_line(path, line_no) + "expected " +
                                              std::to_string(t.header.size()) + " fields, got " +
                                              std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (in.bad()) throw Error(Errc::io, "error reading " + path);
  if (t.header.empty()) throw Error(Errc::invalid_argument, path + ": no header line");
  return t;
}

namespace detail {

inline void expect_columns(const CsvTable& t, const std::string& path,
                           const std::vector<std::string>& required) {
  for (std::size_t i = 0; i < required.size(); ++i)
    if (t.header.size() <= i || t.header[i] != required[i])
      throw Error(Errc::invalid_argument, path + ": header must start with " + [&] {
        std::string s;
        for (const auto& r : required) s += (s.empty() ? "" : ",") + r;
        return s;
      }());
}

}  // namespace detail

/// Reads micro records. A `weight` column directly after `outcome` is the
/// sampling weight (default 1); remaining columns are covariates.
inline std::vector<MicroRecord> read_micro_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  detail::expect_columns(t, path, {"unit", "time", "outcome"});
  const bool has_weight = t.header.size() > 3 && t.header[3] == "weight";
  const std::size_t first_cov = has_weight ? 4 : 3;
  std::vector<MicroRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::string where = detail::at_line(path, t.line_numbers[r]);
    MicroRecord m;
    m.unit = f[0];
    if (m.unit.empty()) throw Error(Errc::invalid_argument, where + "empty unit");
    m.time = detail::parse_int(f[1], where, "time");
    m.outcome = detail::parse_double(f[2], where, "outcome");
    if (has_weight) {
      m.sampling_weight = detail::parse_double(f[3], where, "weight");
      if (m.sampling_weight < 0.0) throw Error(Errc::invalid_argument, where + "negative weight");
    }
    for (std::size_t c = first_cov; c < f.size(); ++c)
      m.covariates[t.header[c]] = detail::parse_double(f[c], where, t.header[c]);
    out.push_back(std::move(m));
  }
  return out;
}

struct PanelFile {
  std::vector<LongRecord> records;
  std::vector<std::string> covariate_names;
  std::optional<std::string> treated;
  std::optional<int> treatment_start;
};

inline PanelFile read_panel_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  detail::expect_columns(t, path, {"unit", "time", "value"});
  const bool has_count = t.header.size() > 3 && t.header[3] == "count";
  const std::size_t first_cov = has_count ? 4 : 3;
  PanelFile p;
  p.covariate_names.assign(t.header.begin() + static_cast<long>(first_cov), t.header.end());
  if (auto it = t.meta.find("treated"); it != t.meta.end()) p.treated = it->second;
  if (auto it = t.meta.find("treatment_start"); it != t.meta.end())
    p.treatment_start = detail::parse_int(it->second, path + ": ", "treatment_start");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::string where = detail::at_line(path, t.line_numbers[r]);
    LongRecord rec;
    rec.unit = f[0];
    if (rec.unit.empty()) throw Error(Errc::invalid_argument, where + "empty unit");
    rec.time = detail::parse_int(f[1], where, "time");
    rec.value = detail::parse_double(f[2], where, "value");
    if (has_count) rec.count = detail::parse_double(f[3], where, "count");
    for (std::size_t c = first_cov; c < f.size(); ++c)
      rec.covariates.push_back(detail::parse_double(f[c], where, t.header[c]));
    p.records.push_back(std::move(rec));
  }
  return p;
}

inline std::string panel_csv(const BalancedPanel& panel) {
  std::ostringstream os;
  os << "# format_version=" << kFormatVersion << "\n";
  os << "# treated=" << panel.units()[0] << "\n";
  os << "# treatment_start=" << panel.treatment_start() << "\n";
  os << "unit,time,value";
  if (panel.cell_counts()) os << ",count";
  for (const auto& n : panel.covariates().names) os << "," << n;
  os << "\n" << std::setprecision(17);
  for (const auto& r : to_long(panel)) {
    os << r.unit << "," << r.time << "," << r.value;
    if (r.count) os << "," << *r.count;
    for (double c : r.covariates) os << "," << c;
    os << "\n";
  }
  return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out << content;
  out.close();
  if (!out) throw Error(Errc::io, "error writing " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace sdid::io

#endif  // SDID_IO_HPP

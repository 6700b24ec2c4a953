#ifndef SDID_MONTECARLO_HPP
#define SDID_MONTECARLO_HPP

// Size study under the null. A fixed micro-level surface
//   yhat_ijt = gamma_j + delta_t + b * x_i
// is drawn once per design; each replication adds a state-year error
//   eps_jt = lambda * eta_jt + (1 - lambda) * e_jt,  eta_jt = rho * eta_j,t-1 + nu_jt
// to the cell means and runs every requested test on unit 0.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdid/error.hpp"
#include "sdid/estimators.hpp"
#include "sdid/inference.hpp"
#include "sdid/panel.hpp"
#include "sdid/parallel.hpp"
#include "sdid/rng.hpp"

namespace sdid::mc {

enum class StudyMethod {
  crve,
  crb,
  mbb,
  placebo_did_normal,
  placebo_did_t,
  placebo_sdid_normal,
  placebo_sdid_t,
};

inline const std::vector<StudyMethod>& all_methods() {
  static const std::vector<StudyMethod> m{StudyMethod::crve,
                                          StudyMethod::crb,
                                          StudyMethod::mbb,
                                          StudyMethod::placebo_did_normal,
                                          StudyMethod::placebo_did_t,
                                          StudyMethod::placebo_sdid_normal,
                                          StudyMethod::placebo_sdid_t};
  return m;
}

inline const char* to_string(StudyMethod m) {
  switch (m) {
    case StudyMethod::crve: return "CRVE";
    case StudyMethod::crb: return "CRB";
    case StudyMethod::mbb: return "MBB";
    case StudyMethod::placebo_did_normal: return "PLACEBO_DID_NORMAL";
    case StudyMethod::placebo_did_t: return "PLACEBO_DID_T";
    case StudyMethod::placebo_sdid_normal: return "PLACEBO_SDID_NORMAL";
    case StudyMethod::placebo_sdid_t: return "PLACEBO_SDID_T";
  }
  return "?";
}

inline std::optional<StudyMethod> parse_method(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto m : all_methods())
    if (name == to_string(m)) return m;
  return std::nullopt;
}

struct Design {
  int n_controls = 16;
  int periods = 8;
  int pre_periods = 5;
  double rho = 0.8;
};

struct DgpConfig {
  std::vector<Design> designs{Design{}};
  double lambda_mix = 0.95;
  int cell_size = 670;
  int replications = 500;
  int placebo_b = 100;
  int crb_b = 400;
  int mbb_b = 150;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::vector<StudyMethod> methods = all_methods();
  double covariate_coef = 1.0;  // b in the surface; 0 disables the index
  bool surface_effects = true;  // false zeroes gamma and delta
  double drift = 0.05;          // linear year trend in delta_t

  void validate() const {
    auto bad = [](const std::string& key, const std::string& why) {
      throw Error(Errc::config_parse, "key '" + key + "': " + why);
    };
    if (designs.empty()) bad("designs", "no design points");
    for (const auto& d : designs) {
      if (d.n_controls < 3) bad("n_controls", "must be >= 3");
      if (d.pre_periods < 2) bad("pre_periods", "must be >= 2");
      if (d.pre_periods >= d.periods) bad("pre_periods", "must be < periods");
      if (!(d.rho >= 0.0 && d.rho < 1.0)) bad("rho", "must be in [0,1)");
    }
    if (!(lambda_mix >= 0.0 && lambda_mix <= 1.0)) bad("lambda_mix", "must be in [0,1]");
    if (cell_size < 1) bad("cell_size", "must be >= 1");
    if (replications < 100) bad("replications", "must be >= 100");
    if (placebo_b < 1) bad("placebo_b", "must be >= 1");
    if (crb_b < 200) bad("crb_b", "must be >= 200");
    if (mbb_b < 2) bad("mbb_b", "must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) bad("alpha", "must be in (0,1)");
    if (methods.empty()) bad("methods", "no methods");
  }

  /// Large-run replication counts (--full-scale).
  void apply_full_scale() {
    replications = 10000;
    placebo_b = 200;
    crb_b = 1000;
    mbb_b = 300;
  }

  /// One key = value per line, fixed key order; identifies a study for
  /// checkpoints and manifests.
  std::string canonical() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "designs = ";
    for (std::size_t i = 0; i < designs.size(); ++i)
      os << (i ? "; " : "") << designs[i].n_controls << "/" << designs[i].periods << "/"
         << designs[i].pre_periods << "/" << designs[i].rho;
    os << "\nlambda_mix = " << lambda_mix << "\ncell_size = " << cell_size
       << "\nreplications = " << replications << "\nplacebo_b = " << placebo_b
       << "\ncrb_b = " << crb_b << "\nmbb_b = " << mbb_b << "\nseed = " << seed
       << "\nalpha = " << alpha << "\nmethods = ";
    for (std::size_t i = 0; i < methods.size(); ++i) os << (i ? ", " : "") << to_string(methods[i]);
    os << "\ncovariate_coef = " << covariate_coef << "\nsurface_effects = "
       << (surface_effects ? "true" : "false") << "\ndrift = " << drift << "\n";
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Surface and errors

struct BaseSurface {
  Vector gamma;             // unit effects
  Vector delta;             // period effects
  Matrix cell_means;        // weighted means of yhat, unit x period
  Matrix counts;            // records per cell
  std::vector<MicroCell> treated_cells;  // unit 0 records, one cell per period
};

inline BaseSurface build_base_surface(const DgpConfig& config, const Design& d,
                                      std::uint64_t design_index = 0) {
  CounterRng rng(config.seed, StreamDomain::surface, design_index);
  const int n = d.n_controls + 1;
  const int t = d.periods;
  BaseSurface s;
  s.gamma = Vector::Zero(n);
  s.delta = Vector::Zero(t);
  for (int j = 0; j < n; ++j) s.gamma[j] = rng.normal(0.0, 0.5);
  for (int c = 0; c < t; ++c) s.delta[c] = config.drift * c + rng.normal(0.0, 0.1);
  if (!config.surface_effects) {
    s.gamma.setZero();
    s.delta.setZero();
  }
  s.cell_means.resize(n, t);
  s.counts.resize(n, t);
  for (int j = 0; j < n; ++j) {
    for (int c = 0; c < t; ++c) {
      const long long m = std::max<long long>(1, rng.poisson(config.cell_size));
      MicroCell cell;
      double sw = 0.0;
      double sy = 0.0;
      for (long long i = 0; i < m; ++i) {
        const double x = rng.normal();
        const double w = 0.5 + rng.uniform();
        const double y = s.gamma[j] + s.delta[c] + config.covariate_coef * x;
        sw += w;
        sy += w * y;
        if (j == 0) {
          cell.weights.push_back(w);
          cell.outcomes.push_back(y);
        }
      }
      s.cell_means(j, c) = sy / sw;
      s.counts(j, c) = static_cast<double>(m);
      if (j == 0) s.treated_cells.push_back(std::move(cell));
    }
  }
  return s;
}

inline Matrix draw_errors(const DgpConfig& config, const Design& d, CounterRng& rng) {
  const int n = d.n_controls + 1;
  const int t = d.periods;
  const double rho = d.rho;
  const double lambda = config.lambda_mix;
  Matrix eps(n, t);
  for (int j = 0; j < n; ++j) {
    double eta = rng.normal() / std::sqrt(1.0 - rho * rho);
    for (int c = 0; c < t; ++c) {
      if (c > 0) eta = rho * eta + rng.normal();
      eps(j, c) = lambda * eta + (1.0 - lambda) * rng.normal();
    }
  }
  return eps;
}

// ---------------------------------------------------------------------------
// Study

enum class Outcome : char { accept = '0', reject = '1', failed = 'F' };

struct RejectionRow {
  StudyMethod method;
  Design design;
  double rate = 0.0;
  double mc_se = 0.0;
  int replications = 0;
  int failures = 0;
};

struct RejectionReport {
  std::vector<RejectionRow> rows;
  double alpha = 0.05;
  double runtime_seconds = 0.0;
  bool complete = true;
  int completed_replications = 0;
  int total_replications = 0;
};

struct StudyOptions {
  int workers = 1;
  std::string checkpoint;  // empty: no checkpoint file
  bool resume = false;
  std::optional<int> stop_after;  // new replications before stopping
};

namespace detail {

inline std::uint64_t rep_index(std::size_t design, int rep) {
  return (static_cast<std::uint64_t>(design) << 32) | static_cast<std::uint32_t>(rep);
}

/// Runs every requested method on one replication.
inline std::vector<Outcome> run_replication(const DgpConfig& config, std::size_t di,
                                            const BaseSurface& surface, int rep) {
  const Design& d = config.designs[di];
  const std::uint64_t idx = rep_index(di, rep);
  CounterRng err_rng(config.seed, StreamDomain::errors, idx);
  const Matrix eps = draw_errors(config, d, err_rng);
  const Matrix y = surface.cell_means + eps;

  std::vector<std::string> units;
  for (int j = 0; j <= d.n_controls; ++j) units.push_back("u" + std::to_string(j));
  std::vector<int> times;
  for (int c = 0; c < d.periods; ++c) times.push_back(c + 1);
  const BalancedPanel panel(units, times, y, d.pre_periods + 1, surface.counts);

  auto verdict = [&](double p) { return p < config.alpha ? Outcome::reject : Outcome::accept; };
  std::optional<std::vector<double>> did_placebo, sdid_placebo;
  std::optional<double> did_tau, sdid_tau;
  auto placebo = [&](Method m, std::optional<std::vector<double>>& dist, std::optional<double>& tau) {
    if (dist) return;
    EstimatorConfig ec;
    ec.method = m;
    PlaceboOptions po;
    po.replications = config.placebo_b;
    po.seed = config.seed;
    po.stream = stream_id(m == Method::did ? StreamDomain::placebo_did : StreamDomain::placebo_sdid, idx);
    tau = estimate(panel, ec).tau;
    dist = placebo_distribution(panel, ec, po);
  };

  std::vector<Outcome> out;
  for (StudyMethod m : config.methods) {
    try {
      switch (m) {
        case StudyMethod::crve: out.push_back(verdict(crve_se(panel).p_value)); break;
        case StudyMethod::crb: {
          CrbOptions o;
          o.replications = config.crb_b;
          o.seed = config.seed;
          o.stream = stream_id(StreamDomain::crb, idx);
          out.push_back(verdict(cluster_residual_bootstrap(panel, o).p_value));
          break;
        }
        case StudyMethod::mbb: {
          MbbOptions o;
          o.replications = config.mbb_b;
          o.seed = config.seed;
          o.stream = stream_id(StreamDomain::mbb, idx);
          std::vector<const MicroCell*> cells;
          for (const auto& c : surface.treated_cells) cells.push_back(&c);
          const Vector shift = eps.row(0).transpose();
          out.push_back(verdict(block_bootstrap_core(y, cells, shift, d.pre_periods, o).p_value));
          break;
        }
        case StudyMethod::placebo_did_normal:
        case StudyMethod::placebo_did_t: {
          placebo(Method::did, did_placebo, did_tau);
          const DfMode mode = m == StudyMethod::placebo_did_t ? DfMode::t_corrected : DfMode::normal;
          out.push_back(verdict(placebo_from_distribution(*did_tau, *did_placebo, panel.n_units(), mode).p_value));
          break;
        }
        case StudyMethod::placebo_sdid_normal:
        case StudyMethod::placebo_sdid_t: {
          placebo(Method::sdid, sdid_placebo, sdid_tau);
          const DfMode mode = m == StudyMethod::placebo_sdid_t ? DfMode::t_corrected : DfMode::normal;
          out.push_back(verdict(placebo_from_distribution(*sdid_tau, *sdid_placebo, panel.n_units(), mode).p_value));
          break;
        }
      }
    } catch (const Error&) {
      out.push_back(Outcome::failed);
    }
  }
  return out;
}

inline std::string checkpoint_header(const DgpConfig& config) {
  std::string h = "# sdid checkpoint v1\n";
  std::istringstream is(config.canonical());
  for (std::string line; std::getline(is, line);) h += "# " + line + "\n";
  return h + "# end\n";
}

// Reads completed replications; a partial trailing line is ignored.
inline std::map<std::pair<std::size_t, int>, std::vector<Outcome>> read_checkpoint(
    const std::string& path, const DgpConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open checkpoint " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const std::string header = checkpoint_header(config);
  if (text.compare(0, header.size(), header) != 0)
    throw Error(Errc::config_parse, "checkpoint " + path + " was written for a different configuration");
  std::map<std::pair<std::size_t, int>, std::vector<Outcome>> done;
  std::size_t pos = header.size();
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) break;
    std::istringstream line(text.substr(pos, end - pos));
    pos = end + 1;
    std::size_t di = 0;
    int rep = 0;
    std::string codes;
    if (!(line >> di >> rep >> codes)) continue;
    if (di >= config.designs.size() || rep < 0 || rep >= config.replications ||
        codes.size() != config.methods.size())
      continue;
    std::vector<Outcome> o;
    bool ok = true;
    for (char c : codes) {
      if (c != '0' && c != '1' && c != 'F') ok = false;
      o.push_back(static_cast<Outcome>(c));
    }
    if (ok) done[{di, rep}] = std::move(o);
  }
  return done;
}

}  // namespace detail

/// Runs the study. Replications are independent and keyed by (seed, design,
/// replication), so the report does not depend on `workers` or on resuming.
inline RejectionReport run_study(const DgpConfig& config, const StudyOptions& options = {}) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_designs = config.designs.size();
  const auto reps = static_cast<std::size_t>(config.replications);

  std::vector<std::vector<Outcome>> results(n_designs * reps);
  std::vector<char> have(results.size(), 0);
  std::ofstream ckpt;
  if (!options.checkpoint.empty()) {
    bool fresh = true;
    if (options.resume) {
      std::ifstream probe(options.checkpoint);
      if (probe) {
        fresh = false;
        for (auto& [key, o] : detail::read_checkpoint(options.checkpoint, config)) {
          const std::size_t slot = key.first * reps + static_cast<std::size_t>(key.second);
          results[slot] = std::move(o);
          have[slot] = 1;
        }
      }
    }
    if (fresh) {
      ckpt.open(options.checkpoint, std::ios::binary | std::ios::trunc);
      ckpt << detail::checkpoint_header(config);
    } else {
      // Rewrite the completed lines so a torn trailing line cannot merge with
      // the next append.
      ckpt.open(options.checkpoint, std::ios::binary | std::ios::trunc);
      ckpt << detail::checkpoint_header(config);
      for (std::size_t slot = 0; slot < results.size(); ++slot) {
        if (!have[slot]) continue;
        ckpt << slot / reps << ' ' << slot % reps << ' ';
        for (Outcome o : results[slot]) ckpt << static_cast<char>(o);
        ckpt << '\n';
      }
    }
    if (!ckpt) throw Error(Errc::io, "cannot write checkpoint " + options.checkpoint);
    ckpt.flush();
  }

  std::vector<BaseSurface> surfaces;
  for (std::size_t di = 0; di < n_designs; ++di)
    surfaces.push_back(build_base_surface(config, config.designs[di], di));

  std::vector<std::size_t> todo;
  for (std::size_t slot = 0; slot < results.size(); ++slot)
    if (!have[slot]) todo.push_back(slot);

  std::mutex io;
  std::atomic<int> started{0};
  parallel_for(todo.size(), options.workers, [&](std::size_t i) {
    if (options.stop_after && started.fetch_add(1) >= *options.stop_after) return;
    const std::size_t slot = todo[i];
    const std::size_t di = slot / reps;
    const int rep = static_cast<int>(slot % reps);
    auto outcome = detail::run_replication(config, di, surfaces[di], rep);
    std::lock_guard<std::mutex> lock(io);
    if (ckpt.is_open()) {
      ckpt << di << ' ' << rep << ' ';
      for (Outcome o : outcome) ckpt << static_cast<char>(o);
      ckpt << '\n';
      ckpt.flush();
    }
    results[slot] = std::move(outcome);
    have[slot] = 1;
  });

  RejectionReport report;
  report.alpha = config.alpha;
  report.total_replications = static_cast<int>(results.size());
  report.completed_replications = static_cast<int>(std::count(have.begin(), have.end(), 1));
  report.complete = report.completed_replications == report.total_replications;
  for (std::size_t di = 0; di < n_designs; ++di) {
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      int rejects = 0;
      int failures = 0;
      int ok = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const std::size_t slot = di * reps + r;
        if (!have[slot]) continue;
        const Outcome o = results[slot][mi];
        if (o == Outcome::failed) {
          ++failures;
        } else {
          ++ok;
          if (o == Outcome::reject) ++rejects;
        }
      }
      RejectionRow row;
      row.method = config.methods[mi];
      row.design = config.designs[di];
      row.replications = ok + failures;
      row.failures = failures;
      row.rate = ok ? static_cast<double>(rejects) / ok : 0.0;
      row.mc_se = ok ? std::sqrt(row.rate * (1.0 - row.rate) / ok) : 0.0;
      report.rows.push_back(row);
    }
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Output

inline std::string report_csv(const RejectionReport& report) {
  std::ostringstream os;
  os << "# format_version=1\n";
  os << "method,n0,t,tpre,rho,rate,mc_se,R,failures\n";
  os << std::fixed;
  for (const auto& r : report.rows) {
    os << to_string(r.method) << ',' << r.design.n_controls << ',' << r.design.periods << ','
       << r.design.pre_periods << ',' << std::setprecision(2) << r.design.rho << ','
       << std::setprecision(6) << r.rate << ',' << r.mc_se << ',' << r.replications << ','
       << r.failures << '\n';
  }
  return os.str();
}

/// Methods as rows, design points as columns, "rate (mc_se)" cells.
inline std::string report_table(const RejectionReport& report) {
  std::vector<std::string> methods;
  std::vector<std::string> designs;
  std::map<std::pair<std::string, std::string>, std::string> cells;
  for (const auto& r : report.rows) {
    const std::string m = to_string(r.method);
    std::ostringstream d;
    d << "N0=" << r.design.n_controls << " T=" << r.design.periods << " Tpre=" << r.design.pre_periods
      << " rho=" << r.design.rho;
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    if (std::find(designs.begin(), designs.end(), d.str()) == designs.end()) designs.push_back(d.str());
    std::ostringstream c;
    c << std::fixed << std::setprecision(3) << r.rate << " (" << r.mc_se << ")";
    if (r.failures) c << " f=" << r.failures;
    cells[{m, d.str()}] = c.str();
  }
  std::size_t w0 = 6;
  for (const auto& m : methods) w0 = std::max(w0, m.size());
  std::vector<std::size_t> widths;
  for (const auto& d : designs) {
    std::size_t w = d.size();
    for (const auto& m : methods) w = std::max(w, cells[{m, d}].size());
    widths.push_back(w);
  }
  std::ostringstream os;
  os << "Rejection rates under the null, nominal size " << report.alpha
     << ", Monte Carlo SE in parentheses\n";
  os << std::left << std::setw(static_cast<int>(w0)) << "method";
  for (std::size_t i = 0; i < designs.size(); ++i)
    os << "  " << std::setw(static_cast<int>(widths[i])) << designs[i];
  os << '\n';
  for (const auto& m : methods) {
    os << std::setw(static_cast<int>(w0)) << m;
    for (std::size_t i = 0; i < designs.size(); ++i)
      os << "  " << std::setw(static_cast<int>(widths[i])) << cells[{m, designs[i]}];
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Config file

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment. Design points come
/// either from `designs = n0/t/tpre/rho; ...` or from the single-design keys
/// n_controls, periods, pre_periods, rho.
inline DgpConfig parse_config(const std::string& text) {
  DgpConfig c;
  Design single;
  bool single_set = false;
  bool designs_set = false;
  std::set<std::string> seen;
  std::istringstream is(text);
  int line_no = 0;
  for (std::string raw; std::getline(is, raw);) {
    ++line_no;
    const std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no);
    if (eq == std::string::npos) throw Error(Errc::config_parse, where + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw Error(Errc::config_parse, where + ": key '" + key + "' repeated");
    auto fail = [&](const std::string& why) {
      throw Error(Errc::config_parse, where + ": key '" + key + "': " + why);
    };
    auto to_int = [&](const std::string& v) {
      std::size_t used = 0;
      long long x = 0;
      try {
        x = std::stoll(v, &used);
      } catch (const std::exception&) {
        fail("expected an integer, got '" + v + "'");
      }
      if (used != v.size()) fail("expected an integer, got '" + v + "'");
      return x;
    };
    auto to_double = [&](const std::string& v) {
      std::size_t used = 0;
      double x = 0;
      try {
        x = std::stod(v, &used);
      } catch (const std::exception&) {
        fail("expected a number, got '" + v + "'");
      }
      if (used != v.size()) fail("expected a number, got '" + v + "'");
      return x;
    };
    auto to_bool = [&](const std::string& v) {
      if (v == "true" || v == "1" || v == "yes") return true;
      if (v == "false" || v == "0" || v == "no") return false;
      fail("expected true or false, got '" + v + "'");
      return false;
    };
    if (key == "designs") {
      designs_set = true;
      c.designs.clear();
      for (const auto& item : detail::split(value, ';')) {
        if (item.empty()) continue;
        const auto parts = detail::split(item, '/');
        if (parts.size() != 4) fail("each design is n0/t/tpre/rho, got '" + item + "'");
        c.designs.push_back({static_cast<int>(to_int(parts[0])), static_cast<int>(to_int(parts[1])),
                             static_cast<int>(to_int(parts[2])), to_double(parts[3])});
      }
    } else if (key == "n_controls") {
      single.n_controls = static_cast<int>(to_int(value));
      single_set = true;
    } else if (key == "periods") {
      single.periods = static_cast<int>(to_int(value));
      single_set = true;
    } else if (key == "pre_periods") {
      single.pre_periods = static_cast<int>(to_int(value));
      single_set = true;
    } else if (key == "rho") {
      single.rho = to_double(value);
      single_set = true;
    } else if (key == "lambda_mix") {
      c.lambda_mix = to_double(value);
    } else if (key == "cell_size") {
      c.cell_size = static_cast<int>(to_int(value));
    } else if (key == "replications") {
      c.replications = static_cast<int>(to_int(value));
    } else if (key == "placebo_b") {
      c.placebo_b = static_cast<int>(to_int(value));
    } else if (key == "crb_b") {
      c.crb_b = static_cast<int>(to_int(value));
    } else if (key == "mbb_b") {
      c.mbb_b = static_cast<int>(to_int(value));
    } else if (key == "seed") {
      const long long s = to_int(value);
      if (s < 0) fail("must be >= 0");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "alpha") {
      c.alpha = to_double(value);
    } else if (key == "methods") {
      c.methods.clear();
      for (const auto& name : detail::split(value, ',')) {
        const auto m = parse_method(name);
        if (!m) fail("unknown method '" + name + "'");
        if (std::find(c.methods.begin(), c.methods.end(), *m) != c.methods.end())
          fail("method '" + name + "' listed twice");
        c.methods.push_back(*m);
      }
    } else if (key == "covariate_coef") {
      c.covariate_coef = to_double(value);
    } else if (key == "surface_effects") {
      c.surface_effects = to_bool(value);
    } else if (key == "drift") {
      c.drift = to_double(value);
    } else if (key == "full_scale") {
      if (to_bool(value)) c.apply_full_scale();
    } else {
      fail("unknown key");
    }
  }
  if (designs_set && single_set)
    throw Error(Errc::config_parse, "key 'designs': cannot be combined with n_controls/periods/pre_periods/rho");
  if (single_set) c.designs = {single};
  c.validate();
  return c;
}

}  // namespace sdid::mc

#endif  // SDID_MONTECARLO_HPP

// sdid: command-line front end.
//
// Exit codes: 0 success, 2 I/O, 3 validation, 4 incompatible or missing
// flags, 5 solver failure, 6 configuration file.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "sdid/estimators.hpp"
#include "sdid/inference.hpp"
#include "sdid/io.hpp"
#include "sdid/montecarlo.hpp"
#include "sdid/panel.hpp"
#include "sdid/uqr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sdid::cli {
namespace {

struct FlagError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(Errc c) {
  switch (c) {
    case Errc::io: return 2;
    case Errc::no_convergence:
    case Errc::solver_failure: return 5;
    case Errc::config_parse: return 6;
    default: return 3;
  }
}

int resolve_workers(std::optional<int> flag) {
  if (flag) return std::max(1, *flag);
  if (const char* env = std::getenv("SDID_WORKERS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw FlagError(std::string("SDID_WORKERS is not an integer: ") + env);
    }
  }
  return 1;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> seed, const std::string& command) {
  if (seed) return *seed;
  std::cerr << "warning: " << command << ": no --seed given, using 0\n";
  return 0;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    io::write_file(out_path, text);
  }
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  auto num = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw FlagError("--grid: not a number: '" + s + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(num(p));
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      throw FlagError("--grid range must be lo:hi:step with step > 0");
    const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');)
    if (!p.empty()) out.push_back(num(p));
  return out;
}

// ---------------------------------------------------------------------------

struct AggregateArgs {
  std::string in, out, treated;
  int start = 0;
  double trim = 0.0;
};

int cmd_aggregate(const AggregateArgs& a, const std::string& argv_line) {
  Stopwatch clock;
  auto records = io::read_micro_csv(a.in);
  const std::size_t before = records.size();
  records = trim_tails(std::move(records), a.trim);
  const BalancedPanel panel = aggregate_micro(records, a.treated, a.start);
  io::write_file(a.out, io::panel_csv(panel));
  RunManifest m;
  m.command = argv_line;
  m.config_hash = sha256_string("aggregate\ntreated=" + a.treated + "\nstart=" + std::to_string(a.start) +
                                "\ntrim=" + fmt(a.trim, 17));
  m.inputs.push_back({a.in, sha256_file(a.in)});
  m.wall_time_seconds = clock.seconds();
  json j = m.to_json();
  j["records_in"] = before;
  j["records_dropped"] = before - records.size();
  io::write_file(a.out + ".manifest.json", j.dump(2) + "\n");
  std::cerr << "aggregated " << records.size() << " records into " << panel.n_units() << " x "
            << panel.n_periods() << " cells";
  if (before != records.size()) std::cerr << " (" << before - records.size() << " trimmed)";
  std::cerr << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string in, out, treated, method = "sdid", inference = "none", plot_data, latex;
  std::optional<int> start;
  bool covariates = false;
  int b = 0;  // 0: method default
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<double> ridge_penalty;
  std::vector<double> alphas{0.05, 0.10};
};

Method parse_est_method(const std::string& s) {
  if (s == "did") return Method::did;
  if (s == "sc") return Method::sc;
  if (s == "sdid") return Method::sdid;
  if (s == "sc-bc") return Method::sc_bias_corrected;
  throw FlagError("--method must be did, sc, sdid or sc-bc");
}

json weights_json(const BalancedPanel& panel, const WeightSet& w) {
  json j;
  j["units"] = json::object();
  for (Eigen::Index i = 0; i < w.unit_weights.size(); ++i)
    j["units"][panel.units()[static_cast<std::size_t>(i + 1)]] = w.unit_weights[i];
  j["times"] = json::object();
  for (Eigen::Index t = 0; t < w.time_weights.size(); ++t)
    j["times"][std::to_string(panel.times()[static_cast<std::size_t>(t)])] = w.time_weights[t];
  if (w.time_weights.size() == 0) j.erase("times");
  return j;
}

std::string latex_block(const std::string& label, double tau, std::optional<double> se,
                        std::optional<double> p) {
  std::ostringstream os;
  os << "\\begin{tabular}{lc}\n\\hline\n & " << label << " \\\\\n\\hline\n";
  os << "Treatment & " << fmt(tau) << " \\\\\n";
  if (se) os << " & (" << fmt(*se) << ") \\\\\n";
  if (p) os << " & [" << fmt(*p) << "] \\\\\n";
  os << "\\hline\n\\end{tabular}\n";
  return os.str();
}

int cmd_estimate(const EstimateArgs& a, const std::string& argv_line) {
  Stopwatch clock;
  const Method method = parse_est_method(a.method);
  const std::string inf = a.inference;
  static const std::vector<std::string> inferences{"none", "crve", "placebo", "placebo-t", "crb", "rmspe",
                                                   "rearrangement"};
  if (std::find(inferences.begin(), inferences.end(), inf) == inferences.end())
    throw FlagError("--inference must be one of crve, placebo, placebo-t, crb, rmspe, rearrangement");
  if ((inf == "crve" || inf == "crb" || inf == "rearrangement") && method != Method::did)
    throw FlagError("--inference " + inf + " applies to --method did only");
  if ((inf == "placebo" || inf == "placebo-t") && method == Method::sc_bias_corrected)
    throw FlagError("--inference " + inf + " supports did, sc and sdid");
  if (a.ridge_penalty && method != Method::sc_bias_corrected)
    throw FlagError("--ridge-penalty applies to --method sc-bc only");

  io::PanelFile file = io::read_panel_csv(a.in);
  const std::string treated = !a.treated.empty() ? a.treated : file.treated.value_or("");
  const std::optional<int> start = a.start ? a.start : file.treatment_start;
  if (treated.empty()) throw FlagError("--treated is required (no '# treated=' line in input)");
  if (!start) throw FlagError("--start is required (no '# treatment_start=' line in input)");
  if (!a.covariates) {
    for (auto& r : file.records) r.covariates.clear();
    file.covariate_names.clear();
  } else if (file.covariate_names.empty()) {
    throw FlagError("--covariates given but the input has no covariate columns");
  }
  BalancedPanel panel = from_long(file.records, treated, *start, file.covariate_names);
  if (inf == "crb" && !panel.cell_counts()) throw FlagError("--inference crb needs a count column");

  json out;
  out["format_version"] = io::kFormatVersion;
  if (a.covariates) {
    const CovariateAdjustment adj = adjust_covariates(panel);
    json beta = json::object();
    for (std::size_t k = 0; k < panel.covariates().names.size(); ++k)
      beta[panel.covariates().names[k]] = adj.beta[static_cast<Eigen::Index>(k)];
    out["covariate_beta"] = beta;
    if (!adj.zero_columns.empty()) out["covariates_dropped"] = adj.zero_columns;
    panel = adj.panel;
  }

  EstimatorConfig config;
  config.method = method;
  config.bias_correction.ridge_penalty = a.ridge_penalty;
  const EstimateResult est =
      method == Method::sdid ? sdid_estimate(panel, config.sdid, true) : estimate(panel, config);

  const bool stochastic = inf == "placebo" || inf == "placebo-t" || inf == "crb";
  std::optional<std::uint64_t> seed;
  if (stochastic) seed = resolve_seed(a.seed, "estimate");
  const int workers = resolve_workers(a.workers);

  std::optional<InferenceResult> res;
  json extras = json::object();
  if (inf == "crve") {
    res = crve_se(panel);
  } else if (inf == "placebo" || inf == "placebo-t") {
    PlaceboOptions o;
    o.replications = a.b > 0 ? a.b : 200;
    o.df_mode = inf == "placebo" ? DfMode::normal : DfMode::t_corrected;
    o.seed = *seed;
    o.workers = workers;
    res = placebo_inference(panel, config, o);
  } else if (inf == "crb") {
    CrbOptions o;
    o.replications = a.b > 0 ? a.b : 1000;
    o.seed = *seed;
    res = cluster_residual_bootstrap(panel, o);
  } else if (inf == "rmspe") {
    res = rmspe_ratio_test(panel, config);
  } else if (inf == "rearrangement") {
    const RearrangementFit fit = rearrangement_test(panel, a.alphas);
    InferenceResult r;
    r.method = InferenceMethod::rearrangement;
    r.estimate = est.tau;
    r.p_value = fit.base_p;
    for (const auto& [alpha, rho] : fit.rho_alpha) {
      std::ostringstream key;
      key << "rho_" << alpha;
      extras[key.str()] = std::isfinite(rho) ? json(rho) : json("inf");
    }
    res = r;
  }

  out["tau"] = est.tau;
  out["se"] = res && res->se ? json(*res->se) : json(nullptr);
  out["p"] = res ? json(res->p_value) : json(nullptr);
  out["method"] = to_string(method);
  out["inference"] = inf;
  if (res) {
    out["replications"] = res->replications;
    for (const auto& [k, v] : res->extras) extras[k] = std::isfinite(v) ? json(v) : json("inf");
    if (!res->flags.empty()) out["inference_flags"] = res->flags;
  }
  if (!extras.empty()) out["extras"] = extras;
  if (est.weights) out["weights"] = weights_json(panel, *est.weights);
  out["pre_rmspe"] = est.pre_rmspe;
  out["counterfactual"] = std::vector<double>(est.counterfactual.data(),
                                              est.counterfactual.data() + est.counterfactual.size());
  out["effects"] = std::vector<double>(est.effects.data(), est.effects.data() + est.effects.size());
  if (!est.diagnostics.empty()) out["diagnostics"] = est.diagnostics;
  if (!est.flags.empty()) out["flags"] = est.flags;

  std::ostringstream canon;
  canon << "estimate\nmethod=" << a.method << "\ninference=" << inf << "\ntreated=" << treated
        << "\nstart=" << *start << "\ncovariates=" << a.covariates << "\nB=" << a.b;
  if (a.ridge_penalty) canon << "\nridge_penalty=" << fmt(*a.ridge_penalty, 17);
  RunManifest m;
  m.command = argv_line;
  m.config_hash = sha256_string(canon.str());
  m.inputs.push_back({a.in, sha256_file(a.in)});
  m.seed = seed;
  m.wall_time_seconds = clock.seconds();
  out["manifest"] = m.to_json();

  if (!a.plot_data.empty()) {
    std::ostringstream os;
    os << "# format_version=" << io::kFormatVersion << "\n";
    os << "time,treated,counterfactual,effect\n" << std::setprecision(17);
    const Eigen::Index pre = panel.n_pre();
    for (Eigen::Index t = 0; t < panel.n_periods(); ++t) {
      const double y = panel.outcomes()(0, t);
      const double gap = t < pre ? est.pre_gaps[t] : est.effects[t - pre];
      os << panel.times()[static_cast<std::size_t>(t)] << "," << y << "," << y - gap << "," << gap << "\n";
    }
    io::write_file(a.plot_data, os.str());
  }
  if (!a.latex.empty()) {
    std::optional<double> p;
    if (res) p = res->p_value;
    emit(a.latex, latex_block(to_string(method), est.tau, res ? res->se : std::nullopt, p));
  }
  emit(a.out, out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct MicroArgs {
  std::string in, out, treated;
  int start = 0;
  int b = 300;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

int cmd_estimate_micro(const MicroArgs& a, const std::string& argv_line) {
  Stopwatch clock;
  const auto records = io::read_micro_csv(a.in);
  const MicroPanel micro = MicroPanel::from_records(records, a.treated, a.start);
  MbbOptions o;
  o.replications = a.b;
  o.seed = resolve_seed(a.seed, "estimate-micro");
  o.workers = resolve_workers(a.workers);
  const InferenceResult r = modified_block_bootstrap(micro, o);
  json out;
  out["format_version"] = io::kFormatVersion;
  out["tau"] = r.estimate;
  out["se"] = *r.se;
  out["p"] = r.p_value;
  out["method"] = "DID";
  out["inference"] = "mbb";
  out["replications"] = r.replications;
  if (!r.flags.empty()) out["inference_flags"] = r.flags;
  RunManifest m;
  m.command = argv_line;
  m.config_hash = sha256_string("estimate-micro\ntreated=" + a.treated + "\nstart=" +
                                std::to_string(a.start) + "\nB=" + std::to_string(a.b));
  m.inputs.push_back({a.in, sha256_file(a.in)});
  m.seed = o.seed;
  m.wall_time_seconds = clock.seconds();
  out["manifest"] = m.to_json();
  emit(a.out, out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config, out = "simulation";
  std::optional<int> workers;
  bool resume = false;
  bool full_scale = false;
  std::optional<int> stop_after;
};

int cmd_simulate(const SimulateArgs& a, const std::string& argv_line) {
  Stopwatch clock;
  const std::string text = io::read_file(a.config);
  mc::DgpConfig config = mc::parse_config(text);
  bool seed_given = false;
  {
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);) {
      const auto eq = line.find('=');
      const auto hash = line.find('#');
      if (eq != std::string::npos && (hash == std::string::npos || hash > eq) &&
          mc::detail::trim(line.substr(0, eq)) == "seed")
        seed_given = true;
    }
  }
  if (!seed_given) std::cerr << "warning: simulate: config has no seed, using 0\n";
  if (a.full_scale) {
    config.apply_full_scale();
    config.validate();
  }
  fs::create_directories(a.out);
  mc::StudyOptions so;
  so.workers = resolve_workers(a.workers);
  so.checkpoint = (fs::path(a.out) / "checkpoint.txt").string();
  so.resume = a.resume;
  so.stop_after = a.stop_after;
  const mc::RejectionReport report = mc::run_study(config, so);
  if (!report.complete) {
    std::cerr << "stopped after " << report.completed_replications << " of " << report.total_replications
              << " replications; rerun with --resume to finish\n";
    return 0;
  }
  const std::string csv = mc::report_csv(report);
  const std::string table = mc::report_table(report);
  io::write_file((fs::path(a.out) / "report.csv").string(), csv);
  io::write_file((fs::path(a.out) / "report.txt").string(), table);
  RunManifest m;
  m.command = argv_line;
  m.config_hash = sha256_string(config.canonical());
  m.inputs.push_back({a.config, sha256_file(a.config)});
  m.seed = config.seed;
  m.wall_time_seconds = clock.seconds();
  json j = m.to_json();
  j["outputs"] = {{"report.csv", sha256_string(csv)}, {"report.txt", sha256_string(table)}};
  io::write_file((fs::path(a.out) / "manifest.json").string(), j.dump(2) + "\n");
  std::cout << table;
  return 0;
}

// ---------------------------------------------------------------------------

struct UqrArgs {
  std::string in, out, treated, grid, grid_mode = "kappa", se = "bootstrap";
  int start = 0;
  int b = 50;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<double> bandwidth;
};

int cmd_uqr(const UqrArgs& a, const std::string& argv_line) {
  Stopwatch clock;
  UqrOptions o;
  if (a.se == "bootstrap") o.se_mode = UqrSeMode::bootstrap;
  else if (a.se == "crve") o.se_mode = UqrSeMode::crve;
  else if (a.se == "hc2") o.se_mode = UqrSeMode::hc2;
  else throw FlagError("--se must be bootstrap, crve or hc2");
  GridMode mode;
  if (a.grid_mode == "kappa") mode = GridMode::kappa;
  else if (a.grid_mode == "threshold") mode = GridMode::threshold;
  else throw FlagError("--grid-mode must be kappa or threshold");
  std::vector<double> grid = a.grid.empty() ? std::vector<double>{} : parse_grid(a.grid);
  if (grid.empty()) {
    if (mode == GridMode::threshold) throw FlagError("--grid-mode threshold needs --grid");
    grid = default_kappa_grid();
  }
  o.replications = a.b;
  o.bandwidth = a.bandwidth;
  o.workers = resolve_workers(a.workers);
  if (o.se_mode == UqrSeMode::bootstrap) o.seed = resolve_seed(a.seed, "uqr");

  const auto records = io::read_micro_csv(a.in);
  const MicroPanel micro = MicroPanel::from_records(records, a.treated, a.start);
  const QuantileEffectCurve curve = uqr_curve(micro, grid, mode, o);
  std::ostringstream os;
  os << "# format_version=" << io::kFormatVersion << "\n";
  os << "# se_mode=" << to_string(curve.se_mode) << "\n";
  os << "kappa,threshold,tau,se\n" << std::setprecision(10);
  for (std::size_t i = 0; i < curve.tau.size(); ++i)
    os << curve.kappa[i] << "," << curve.threshold[i] << "," << curve.tau[i] << "," << curve.se[i] << "\n";
  emit(a.out, os.str());
  if (!a.out.empty() && a.out != "-") {
    RunManifest m;
    m.command = argv_line;
    m.config_hash = sha256_string("uqr\ntreated=" + a.treated + "\nstart=" + std::to_string(a.start) +
                                  "\ngrid=" + a.grid + "\ngrid_mode=" + a.grid_mode + "\nse=" + a.se +
                                  "\nB=" + std::to_string(a.b));
    m.inputs.push_back({a.in, sha256_file(a.in)});
    if (o.se_mode == UqrSeMode::bootstrap) m.seed = o.seed;
    m.wall_time_seconds = clock.seconds();
    io::write_file(a.out + ".manifest.json", m.to_json().dump(2) + "\n");
  }
  return 0;
}

}  // namespace
}  // namespace sdid::cli

int main(int argc, char** argv) {
  using namespace sdid::cli;
  std::string argv_line;
  for (int i = 0; i < argc; ++i) argv_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Synthetic difference-in-differences estimation, inference and size studies"};
  app.set_version_flag("--version", SDID_VERSION);
  app.require_subcommand(1);

  AggregateArgs agg;
  auto* c_agg = app.add_subcommand("aggregate", "Aggregate a micro CSV into a unit x time panel CSV");
  c_agg->add_option("--in", agg.in, "micro CSV: unit,time,outcome[,weight][,covariates...]")->required();
  c_agg->add_option("--out", agg.out, "panel CSV to write")->required();
  c_agg->add_option("--treated", agg.treated, "treated unit label")->required();
  c_agg->add_option("--start", agg.start, "first treated period")->required();
  c_agg->add_option("--trim", agg.trim, "drop this fraction of outcomes in each tail before aggregating");

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Estimate the effect on a panel CSV");
  c_est->add_option("--in", est.in, "panel CSV: unit,time,value[,count][,covariates...]")->required();
  c_est->add_option("--out", est.out, "JSON output (default stdout)");
  c_est->add_option("--treated", est.treated, "treated unit (default from the file header)");
  c_est->add_option("--start", est.start, "first treated period (default from the file header)");
  c_est->add_option("--method", est.method, "did | sc | sdid | sc-bc");
  c_est->add_option("--inference", est.inference,
                    "none | crve | placebo | placebo-t | crb | rmspe | rearrangement");
  c_est->add_flag("--covariates", est.covariates, "residualize outcomes on the covariate columns");
  c_est->add_option("--B", est.b, "replications for placebo (200) or crb (1000)");
  c_est->add_option("--seed", est.seed, "seed for stochastic inference");
  c_est->add_option("--workers", est.workers, "worker threads (env SDID_WORKERS)");
  c_est->add_option("--ridge-penalty", est.ridge_penalty, "sc-bc outcome-model ridge penalty");
  c_est->add_option("--alpha", est.alphas, "levels for the rearrangement test")->delimiter(',');
  c_est->add_option("--plot-data", est.plot_data, "write per-period treated/counterfactual CSV");
  c_est->add_option("--latex", est.latex, "write a LaTeX 'tau (se) [p]' block ('-' for stdout)");

  MicroArgs mic;
  auto* c_mic = app.add_subcommand("estimate-micro", "DiD with modified block bootstrap on a micro CSV");
  c_mic->add_option("--in", mic.in, "micro CSV")->required();
  c_mic->add_option("--out", mic.out, "JSON output (default stdout)");
  c_mic->add_option("--treated", mic.treated, "treated unit label")->required();
  c_mic->add_option("--start", mic.start, "first treated period")->required();
  c_mic->add_option("--B", mic.b, "bootstrap replications");
  c_mic->add_option("--seed", mic.seed, "seed");
  c_mic->add_option("--workers", mic.workers, "worker threads (env SDID_WORKERS)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run a Monte Carlo size study");
  c_sim->add_option("--config", sim.config, "study config (key = value lines)")->required();
  c_sim->add_option("--out", sim.out, "output directory");
  c_sim->add_option("--workers", sim.workers, "worker threads (env SDID_WORKERS)");
  c_sim->add_flag("--resume", sim.resume, "continue from the checkpoint in the output directory");
  c_sim->add_flag("--full-scale", sim.full_scale, "10000 replications per design, placebo 200, crb 1000, mbb 300");
  c_sim->add_option("--stop-after", sim.stop_after, "stop after this many new replications");

  UqrArgs uq;
  auto* c_uqr = app.add_subcommand("uqr", "Quantile effect curve via RIF regression");
  c_uqr->add_option("--in", uq.in, "micro CSV")->required();
  c_uqr->add_option("--out", uq.out, "CSV output (default stdout)");
  c_uqr->add_option("--treated", uq.treated, "treated unit label")->required();
  c_uqr->add_option("--start", uq.start, "first treated period")->required();
  c_uqr->add_option("--grid", uq.grid, "comma list or lo:hi:step (default kappa 0.05..0.99)");
  c_uqr->add_option("--grid-mode", uq.grid_mode, "kappa | threshold");
  c_uqr->add_option("--se", uq.se, "bootstrap | crve | hc2");
  c_uqr->add_option("--B", uq.b, "bootstrap replications");
  c_uqr->add_option("--seed", uq.seed, "seed");
  c_uqr->add_option("--workers", uq.workers, "worker threads (env SDID_WORKERS)");
  c_uqr->add_option("--bandwidth", uq.bandwidth, "kernel bandwidth (default Silverman)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  try {
    if (*c_agg) return cmd_aggregate(agg, argv_line);
    if (*c_est) return cmd_estimate(est, argv_line);
    if (*c_mic) return cmd_estimate_micro(mic, argv_line);
    if (*c_sim) return cmd_simulate(sim, argv_line);
    if (*c_uqr) return cmd_uqr(uq, argv_line);
  } catch (const FlagError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const sdid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 4;
}

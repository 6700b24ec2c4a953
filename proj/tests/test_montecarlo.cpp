#include <gtest/gtest.h>

#include <filesystem>

#include "sdid/io.hpp"
#include "sdid/montecarlo.hpp"

using namespace sdid;
using namespace sdid::mc;

namespace {

DgpConfig small_config() {
  DgpConfig c;
  c.designs = {{5, 6, 4, 0.5}};
  c.cell_size = 40;
  c.replications = 100;
  c.placebo_b = 20;
  c.crb_b = 200;
  c.mbb_b = 20;
  c.seed = 11;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Surface, DeterministicPerSeedAndDesign) {
  const auto c = small_config();
  const auto a = build_base_surface(c, c.designs[0], 0);
  const auto b = build_base_surface(c, c.designs[0], 0);
  EXPECT_EQ(a.cell_means, b.cell_means);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_NE(build_base_surface(c, c.designs[0], 1).cell_means, a.cell_means);
  ASSERT_EQ(a.treated_cells.size(), 6u);
  for (std::size_t t = 0; t < 6; ++t)
    EXPECT_EQ(static_cast<double>(a.treated_cells[t].size()), a.counts(0, static_cast<Eigen::Index>(t)));
}

TEST(Surface, TreatedCellsReproduceCellMeans) {
  const auto c = small_config();
  const auto s = build_base_surface(c, c.designs[0]);
  for (std::size_t t = 0; t < s.treated_cells.size(); ++t) {
    const auto& cell = s.treated_cells[t];
    double sw = 0, sy = 0;
    for (std::size_t i = 0; i < cell.size(); ++i) {
      sw += cell.weights[i];
      sy += cell.weights[i] * cell.outcomes[i];
    }
    EXPECT_NEAR(sy / sw, s.cell_means(0, static_cast<Eigen::Index>(t)), 1e-12);
  }
}

TEST(Surface, ZeroEffectsGiveZeroMeans) {
  auto c = small_config();
  c.surface_effects = false;
  c.covariate_coef = 0.0;
  const auto s = build_base_surface(c, c.designs[0]);
  EXPECT_EQ(s.cell_means.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Surface, WithoutCovariateIndexIsExactlyTwoWay) {
  auto c = small_config();
  c.covariate_coef = 0.0;
  const auto s = build_base_surface(c, c.designs[0]);
  const Matrix fitted = s.gamma.replicate(1, 6) + s.delta.transpose().replicate(6, 1);
  EXPECT_LT((s.cell_means - fitted).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Surface, CountsArePoissonAroundCellSize) {
  auto c = small_config();
  c.cell_size = 670;
  c.designs = {{38, 14, 9, 0.8}};
  const auto s = build_base_surface(c, c.designs[0]);
  EXPECT_NEAR(s.counts.mean(), 670.0, 4.0 * std::sqrt(670.0 / s.counts.size()));
}

TEST(Errors, StationaryMomentsMatchClosedForm) {
  auto c = small_config();
  c.lambda_mix = 0.8;
  const Design d{199, 6, 4, 0.6};
  const double lam = c.lambda_mix, rho = d.rho;
  const double var = lam * lam / (1 - rho * rho) + (1 - lam) * (1 - lam);
  const double cov1 = lam * lam * rho / (1 - rho * rho);
  double s0 = 0, s5 = 0, c01 = 0, c45 = 0;
  int n = 0;
  for (int rep = 0; rep < 200; ++rep) {
    CounterRng rng(1, StreamDomain::errors, static_cast<std::uint64_t>(rep));
    const Matrix e = draw_errors(c, d, rng);
    for (Eigen::Index j = 0; j < e.rows(); ++j) {
      s0 += e(j, 0) * e(j, 0);
      s5 += e(j, 5) * e(j, 5);
      c01 += e(j, 0) * e(j, 1);
      c45 += e(j, 4) * e(j, 5);
      ++n;
    }
  }
  // 40000 draws; the variance of these sample moments is about 2 var^2 / n
  const double tol = 5.0 * std::sqrt(2.0 / n) * var;
  EXPECT_NEAR(s0 / n, var, tol);
  EXPECT_NEAR(s5 / n, var, tol);
  EXPECT_NEAR(c01 / n, cov1, tol);
  EXPECT_NEAR(c45 / n, cov1, tol);
}

TEST(Study, WorkersDoNotChangeResults) {
  const auto c = small_config();
  StudyOptions one;
  StudyOptions four;
  four.workers = 4;
  EXPECT_EQ(report_csv(run_study(c, one)), report_csv(run_study(c, four)));
}

TEST(Study, StopAndResumeMatchesUninterruptedRun) {
  const auto c = small_config();
  const std::string ckpt = temp_path("sdid_mc_ckpt.txt");
  std::filesystem::remove(ckpt);
  StudyOptions first;
  first.checkpoint = ckpt;
  first.stop_after = 37;
  first.workers = 2;
  const auto partial = run_study(c, first);
  EXPECT_FALSE(partial.complete);
  EXPECT_EQ(partial.completed_replications, 37);

  // append a torn line as a killed writer would
  {
    std::ofstream out(ckpt, std::ios::app);
    out << "0 99 01";
  }
  StudyOptions resume;
  resume.checkpoint = ckpt;
  resume.resume = true;
  const auto done = run_study(c, resume);
  EXPECT_TRUE(done.complete);
  EXPECT_EQ(report_csv(done), report_csv(run_study(c)));
  std::filesystem::remove(ckpt);
}

TEST(Study, ResumeRejectsCheckpointOfAnotherConfig) {
  auto c = small_config();
  const std::string ckpt = temp_path("sdid_mc_other.txt");
  StudyOptions first;
  first.checkpoint = ckpt;
  first.stop_after = 3;
  run_study(c, first);
  c.seed = 12;
  StudyOptions resume;
  resume.checkpoint = ckpt;
  resume.resume = true;
  EXPECT_THROW(run_study(c, resume), Error);
  std::filesystem::remove(ckpt);
}

TEST(Study, ReportColumnsAndRates) {
  auto c = small_config();
  c.methods = {StudyMethod::crve, StudyMethod::placebo_did_t};
  const auto r = run_study(c);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.replications, 100);
    EXPECT_GE(row.rate, 0.0);
    EXPECT_LE(row.rate, 1.0);
    EXPECT_NEAR(row.mc_se, std::sqrt(row.rate * (1 - row.rate) / (100 - row.failures)), 1e-15);
  }
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.rfind("# format_version=1\nmethod,n0,t,tpre,rho,rate,mc_se,R,failures\nCRVE,5,6,4,0.50,", 0), 0u);
  EXPECT_NE(report_table(r).find("PLACEBO_DID_T"), std::string::npos);
}

TEST(Config, ParsesDesignsAndKeys) {
  const auto c = parse_config(
      "# desk run\n"
      "designs = 16/8/5/0.8; 38/14/9/0.2\n"
      "replications = 200   # per design\n"
      "methods = crve, crb\n"
      "seed = 42\n");
  ASSERT_EQ(c.designs.size(), 2u);
  EXPECT_EQ(c.designs[1].n_controls, 38);
  EXPECT_DOUBLE_EQ(c.designs[1].rho, 0.2);
  EXPECT_EQ(c.replications, 200);
  EXPECT_EQ(c.methods, (std::vector<StudyMethod>{StudyMethod::crve, StudyMethod::crb}));
  EXPECT_EQ(parse_config(c.canonical()).canonical(), c.canonical());
}

TEST(Config, SingleDesignKeys) {
  const auto c = parse_config("n_controls = 38\nperiods = 14\npre_periods = 9\nrho = 0.2\n");
  ASSERT_EQ(c.designs.size(), 1u);
  EXPECT_EQ(c.designs[0].periods, 14);
}

TEST(Config, ErrorsNameTheKey) {
  for (const std::string text : {"replications = ten\n", "bogus = 1\n", "designs = 16/8/5\n",
                                 "replications = 50\n", "alpha = 2\n", "seed = 1\nseed = 2\n",
                                 "methods = crve, nope\n"}) {
    try {
      parse_config(text).validate();
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::config_parse) << text;
      EXPECT_NE(std::string(e.what()).find("key '"), std::string::npos) << e.what();
    }
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cappa/error.hpp"
#include "cappa/harness/config.hpp"
#include "cappa/harness/csv.hpp"
#include "cappa/harness/experiments.hpp"
#include "cappa/harness/manifest.hpp"
#include "cappa/harness/svg.hpp"
#include "test_support.hpp"

using namespace cappa;
using namespace cappa::harness;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Data rows of a rendered CSV (meta lines and header dropped), split into cells.
// Only used on files without quoted fields.
std::vector<std::vector<std::string>> rows_of(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string meta_value(const std::string& csv, const std::string& key) {
  const std::string needle = "# " + key + "=";
  const auto pos = csv.find(needle);
  if (pos == std::string::npos) return {};
  const auto end = csv.find('\r', pos);
  return csv.substr(pos + needle.size(), end - pos - needle.size());
}

// A small instance every solver handles within a fraction of a second.
ExperimentConfig small_config(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.instance = InstanceSpec{40, 20, 3, 0.0, 0.05, 3, Ensemble::gaussian};
  c.cappa.eta = 0.2;
  c.integrator.t_max = 0.5;
  c.init_conditions = {{1, 1.0}, {2, 10.0}};
  c.trials = 3;
  c.dt_sweep = {1e-3, 1e-4};
  c.nm_sweep = {{40, 20}};
  c.delta_mode.kind = DeltaMode::Kind::surrogate;
  c.delta_mode.samples = 50;
  c.output_dir = out;
  return c;
}

ExperimentConfig certified_config(const std::filesystem::path& out) {
  ExperimentConfig c = small_config(out);
  c.instance = InstanceSpec{20, 15, 2, 0.0, 0.05, fixtures::kCertifiedSeed, Ensemble::orthonormal_rows};
  c.nm_sweep = {{20, 15}};
  c.delta_mode.kind = DeltaMode::Kind::exact;
  return c;
}

}  // namespace

TEST(Config, DefaultsAreTheDeskExperiment) {
  const ExperimentConfig c = parse_config("");
  EXPECT_EQ(c.instance.n, 400u);
  EXPECT_EQ(c.instance.m, 200u);
  EXPECT_EQ(c.instance.s, 20u);
  EXPECT_EQ(c.instance.lambda, 0.05);
  EXPECT_EQ(c.instance.sigma, 0.016);
  EXPECT_EQ(c.cappa.eta, 0.4);
  EXPECT_EQ(c.cappa.kappa1, 50.0);
  EXPECT_EQ(c.cappa.alpha1, 0.1);
  EXPECT_EQ(c.cappa.alpha2, 1.1);
  EXPECT_EQ(c.integrator.dt, 1e-3);
  EXPECT_EQ(c.trials, 100u);
  EXPECT_EQ(c.solvers.size(), 5u);
}

TEST(Config, RenderRoundTrip) {
  ExperimentConfig c;
  c.instance = InstanceSpec{30, 12, 4, 0.1, 0.3, 99, Ensemble::orthonormal_rows};
  c.cappa = CappaParams{3.0, 4.0, 0.3, 1.7, 0.1 + 0.2};
  c.integrator.dt = 2.5e-4;
  c.integrator.scheme = Scheme::rk4;
  c.solvers = {Solver::fista, Solver::cappa};
  c.init_conditions = {{9, 0.5}, {10, 7.25}};
  c.init_direction = InitDirection::row_space;
  c.dt_sweep = {1e-2, 1.0 / 3.0};
  c.nm_sweep = {{30, 12}, {60, 24}};
  c.budget = 0.125;
  c.gradient_mode = GradientOperator::Mode::matvec;
  c.output_dir = "some/dir";
  const std::string text = render_config(c);
  const ExperimentConfig back = parse_config(text);
  EXPECT_EQ(render_config(back), text);
  EXPECT_EQ(back.cappa.eta, 0.1 + 0.2);
  EXPECT_EQ(back.dt_sweep[1], 1.0 / 3.0);
  EXPECT_EQ(back.instance.ensemble, Ensemble::orthonormal_rows);
  EXPECT_EQ(back.output_dir, std::filesystem::path("some/dir"));
  EXPECT_EQ(render_config(c, false).find("some/dir"), std::string::npos);
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_config("[instance]\nbogus = 1\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[nonsense]\nn = 1\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("n = 1\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[instance]\nn = 4x\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[instance]\nn = -4\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[cappa]\nalpha1 = 1.5\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[integrator]\ndt = 2\nt_max = 1\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[experiment]\ndt_sweep = 1e-3, 5\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[experiment]\nnm_sweep = 400x200, 500x300\n"), InvalidConfiguration);
  EXPECT_NO_THROW(parse_config("[experiment]\nkeep_ratio = false\nnm_sweep = 400x200, 500x300\n"));
  EXPECT_THROW(parse_config("[experiment]\nsolvers = cappa, magic\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[experiment]\ninit_conditions = 1:1, 2\n"), InvalidConfiguration);
  EXPECT_THROW(parse_config("[analysis]\nbudget = 0\n"), InvalidConfiguration);
}

TEST(Config, LoadsFromManifest) {
  fixtures::TempDir dir;
  ExperimentConfig c = certified_config(dir.path());
  const auto result = run_constants(c);
  const ExperimentConfig back = load_config(dir.path() / "constants_manifest.json");
  EXPECT_EQ(render_config(back, false), render_config(c, false));
  EXPECT_THROW(load_config(dir.path() / "missing.ini"), InvalidConfiguration);
}

TEST(Csv, DoubleFormatRoundTripsProperty) {
  Rng rng(5);
  for (int k = 0; k < 5000; ++k) {
    const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(600)) - 300.0);
    const std::string s = format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
    EXPECT_EQ(s.find(','), std::string::npos);
  }
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_double(std::numeric_limits<double>::denorm_min()), "4.9406564584124654e-324");
}

TEST(Csv, EscapingAndLayout) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");

  CsvTable t({"name", "value", "flag", "count", "missing"});
  t.add_meta("experiment", "demo");
  t.add_row({std::string("x,y"), 1.5, true, std::uint64_t{3}, Empty{}});
  EXPECT_EQ(t.render(), "# experiment=demo\r\nname,value,flag,count,missing\r\n\"x,y\",1.5,true,3,\r\n");
  EXPECT_THROW(t.add_row({1.0}), InvalidArgument);
}

TEST(Svg, RendersSeriesAndSkipsUnplottablePoints) {
  PlotSpec spec;
  spec.title = "decay <test>";
  spec.log_y = true;
  Series s;
  s.label = "cappa";
  s.x = {0, 1, 2, 3};
  s.y = {1, 0, 1e-3, std::nan("")};
  const std::string svg = render_svg(spec, {s});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("decay &lt;test&gt;"), std::string::npos);
  EXPECT_NE(svg.find("cappa"), std::string::npos);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(render_svg(spec, {s}), svg);

  spec.timestamp = "2000-01-01T00:00:00Z";
  EXPECT_NE(render_svg(spec, {s}).find("2000-01-01T00:00:00Z"), std::string::npos);
}

TEST(Manifest, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, HashCoversInputsOnly) {
  RunManifest m;
  m.experiment = "error_decay";
  m.config = "[instance]\nn = 40\n";
  m.version = "1";
  m.runs = {{"cappa/init=0", 1, 10, false}};
  const std::string h = m.hash();
  RunManifest other = m;
  other.runs[0].wall_clock_ns = 99;
  other.runs[0].diverged = true;
  other.host = "elsewhere";
  other.output_dir = "/tmp/x";
  EXPECT_EQ(other.hash(), h);
  other.runs[0].seed = 2;
  EXPECT_NE(other.hash(), h);
  other = m;
  other.config += "\n";
  EXPECT_NE(other.hash(), h);
  EXPECT_NE(m.to_json().find(h), std::string::npos);
}

TEST(Experiments, InitialDirectionsProperty) {
  const auto b = fixtures::certified_instance();
  const auto& p = b.problem;
  const Eigen::JacobiSVD<Matrix> svd(p.phi(), Eigen::ComputeFullV);
  const Matrix null_basis = svd.matrixV().rightCols(p.n() - p.m());
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    for (auto kind : {InitDirection::gaussian, InitDirection::row_space, InitDirection::sparse}) {
      const Vector d = initial_direction(p, kind, seed, 2);
      EXPECT_NEAR(d.norm(), 1.0, 1e-14);
      EXPECT_EQ(d, initial_direction(p, kind, seed, 2));
      if (kind == InitDirection::row_space) EXPECT_LE((null_basis.transpose() * d).norm(), 1e-12);
      if (kind == InitDirection::sparse) EXPECT_LE((d.array() != 0.0).count(), 2);
    }
  }
  const Vector x_ref = Vector::Constant(p.n(), 0.5);
  const Vector x0 = initial_state(p, x_ref, InitDirection::gaussian, {3, 10.0}, 2);
  EXPECT_NEAR((x0 - x_ref).norm(), 10.0 * x_ref.norm(), 1e-12);
  EXPECT_EQ(initial_state(p, x_ref, InitDirection::gaussian, {3, 0.0}, 2), x_ref);
}

TEST(Experiments, ErrorDecayIsDeterministic) {
  fixtures::TempDir a, b;
  const auto ra = run_error_decay(small_config(a.path()));
  const auto rb = run_error_decay(small_config(b.path()));
  EXPECT_EQ(ra.manifest.hash(), rb.manifest.hash());
  for (const char* f : {"error_decay.csv", "error_decay_summary.csv", "error_decay_cappa.svg"})
    EXPECT_EQ(slurp(a.path() / f), slurp(b.path() / f)) << f;
  const std::string csv = slurp(a.path() / "error_decay.csv");
  EXPECT_EQ(meta_value(csv, "manifest_sha256"), ra.manifest.hash());
  EXPECT_NE(csv.find("solver,init_norm,t,error,residual,lyapunov"), std::string::npos);
  // 5 solvers x 2 init conditions.
  EXPECT_EQ(rows_of(slurp(a.path() / "error_decay_summary.csv")).size(), 10u);
}

TEST(Experiments, ErrorDecayFromReferenceIsFlat) {
  fixtures::TempDir dir;
  ExperimentConfig c = small_config(dir.path());
  c.solvers = {Solver::cappa, Solver::pds, Solver::fista};
  c.cappa.alpha1 = 0.9;
  c.init_conditions = {{1, 0.0}};
  run_error_decay(c);
  for (const auto& row : rows_of(slurp(dir.path() / "error_decay.csv"))) EXPECT_LE(std::stod(row[3]), 1e-9) << row[0];
}

TEST(Experiments, ErrorDecayFromReferenceStaysWithinEulerCycle) {
  // With alpha1 = 0.1 the explicit step cannot hold the equilibrium: the
  // residual is kicked onto the 2-cycle of amplitude a solving
  // dt (kappa1 a^(alpha1-1) + kappa2 a^(alpha2-1)) = 2, and stays there.
  fixtures::TempDir dir;
  ExperimentConfig c = small_config(dir.path());
  c.solvers = {Solver::cappa};
  c.init_conditions = {{1, 0.0}};
  run_error_decay(c);
  const auto& p = c.cappa;
  double lo = 1e-12, hi = 1.0;
  for (int k = 0; k < 200; ++k) {
    const double a = std::sqrt(lo * hi);
    const double g = c.integrator.dt * (p.kappa1 * std::pow(a, p.alpha1 - 1) + p.kappa2 * std::pow(a, p.alpha2 - 1));
    (g > 2.0 ? lo : hi) = a;
  }
  double worst = 0.0;
  for (const auto& row : rows_of(slurp(dir.path() / "error_decay.csv"))) worst = std::max(worst, std::stod(row[3]));
  EXPECT_GT(worst, 0.0);
  EXPECT_LE(worst, 2.0 * hi);
}

TEST(Experiments, DivergentRunIsRecordedAndOthersContinue) {
  fixtures::TempDir dir;
  ExperimentConfig c = small_config(dir.path());
  c.solvers = {Solver::cappa, Solver::pds};
  c.cappa.kappa2 = 1e6;
  c.cappa.alpha2 = 3.0;
  c.init_conditions = {{1, 1000.0}};
  const auto r = run_error_decay(c);
  EXPECT_EQ(r.diverged_runs, 1u);
  const auto rows = rows_of(slurp(dir.path() / "error_decay_summary.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].back(), "true");
  EXPECT_EQ(rows[1].back(), "false");
  EXPECT_TRUE(r.manifest.runs[0].diverged);
}

TEST(Experiments, RecoveryExactInNoiselessWellConditionedRegime) {
  fixtures::TempDir dir;
  ExperimentConfig c = certified_config(dir.path());
  c.instance = InstanceSpec{60, 40, 3, 0.0, 1e-4, 11, Ensemble::orthonormal_rows};
  c.cappa = CappaParams{50, 50, 0.9, 1.1, 0.4};
  c.integrator.t_max = 3.0;
  c.init_direction = InitDirection::row_space;
  c.delta_mode.kind = DeltaMode::Kind::surrogate;
  const auto r = run_signal_recovery(c);
  std::map<std::string, std::string> summary;
  for (const auto& row : rows_of(slurp(dir.path() / "recovery_summary.csv"))) summary[row[0]] = row[1];
  EXPECT_EQ(summary["support_match_cappa_ref"], "true");
  EXPECT_EQ(summary["support_match_ref_true"], "true");
  EXPECT_EQ(summary["support_size_true"], "3");
  EXPECT_LE(std::stod(summary["max_abs_diff_cappa_ref"]), 1e-3);
  EXPECT_EQ(rows_of(slurp(dir.path() / "recovery.csv")).size(), 60u);
}

TEST(Experiments, RecoveryNeedsGroundTruth) {
  fixtures::TempDir dir;
  ExperimentConfig c = small_config(dir.path());
  ProblemBundle b = generate_instance(c.instance);
  b.truth.reset();
  save_bundle(b, dir.path() / "bare.bin");
  c.instance_path = dir.path() / "bare.bin";
  EXPECT_THROW(run_signal_recovery(c), InvalidConfiguration);
}

TEST(Experiments, TrialsSummaryIsOrdered) {
  fixtures::TempDir dir;
  ExperimentConfig c = small_config(dir.path());
  c.solvers = {Solver::pds, Solver::fista};
  run_wallclock_trials(c);
  const auto rows = rows_of(slurp(dir.path() / "bench_trials_timing_summary.csv"));
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); i += 3) {
    EXPECT_EQ(rows[i][1], "min");
    EXPECT_EQ(rows[i + 2][1], "max");
    if (rows[i][2] == "nan") continue;
    EXPECT_LE(std::stod(rows[i][2]), std::stod(rows[i + 1][2]));
    EXPECT_LE(std::stod(rows[i + 1][2]), std::stod(rows[i + 2][2]));
  }
  // Per-trial outcomes carry no timing and repeat exactly.
  const std::string first = slurp(dir.path() / "bench_trials.csv");
  fixtures::TempDir again;
  c.output_dir = again.path();
  run_wallclock_trials(c);
  EXPECT_EQ(slurp(again.path() / "bench_trials.csv"), first);
  c.trials = 1;
  EXPECT_THROW(run_wallclock_trials(c), InvalidConfiguration);
}

TEST(Experiments, SinglePointSizeSweepEqualsTrials) {
  fixtures::TempDir a, b;
  ExperimentConfig c = small_config(a.path());
  c.solvers = {Solver::cappa, Solver::fista};
  run_wallclock_trials(c);
  c.output_dir = b.path();
  run_size_sweep(c);
  const auto trials = rows_of(slurp(a.path() / "bench_trials.csv"));
  const auto sweep = rows_of(slurp(b.path() / "bench_size.csv"));
  ASSERT_EQ(trials.size(), sweep.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    EXPECT_EQ(sweep[i][0], "40");
    EXPECT_EQ(std::vector<std::string>(sweep[i].begin() + 3, sweep[i].end()), trials[i]) << "row " << i;
  }
}

TEST(Experiments, SizeSweepScalesSparsity) {
  fixtures::TempDir dir;
  ExperimentConfig c = small_config(dir.path());
  c.solvers = {Solver::fista};
  c.trials = 2;
  c.nm_sweep = {{40, 20}, {80, 40}};
  const auto r = run_size_sweep(c);
  const auto rows = rows_of(slurp(dir.path() / "bench_size_timing.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][2], "3");
  EXPECT_EQ(rows[1][2], "6");
}

TEST(Experiments, DtSweepFlagsSingleStepRun) {
  fixtures::TempDir dir;
  ExperimentConfig c = small_config(dir.path());
  c.dt_sweep = {1e-3, c.integrator.t_max};
  run_dt_sweep(c);
  const auto rows = rows_of(slurp(dir.path() / "dt_sweep_summary.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][4], "false");
  EXPECT_EQ(rows[1][1], "1");
  EXPECT_EQ(rows[1][4], "true");
}

TEST(Experiments, ConstantsCertifiedOnlyWhenExact) {
  fixtures::TempDir dir;
  ExperimentConfig c = certified_config(dir.path());
  const auto b = fixtures::certified_instance();
  const RipModuli moduli = estimate_moduli(b.problem.phi(), 2, c.delta_mode);
  c.cappa.eta = 0.5 * moduli.eta_max;
  const double eps = epsilon_of(constants_from_moduli(moduli, c.cappa).c);
  c.cappa.alpha1 = 1.0 - eps / 2.0;

  const ConstantsReport exact = report_constants(b.problem, 2, c);
  EXPECT_TRUE(exact.certified);
  ASSERT_TRUE(exact.constants && exact.constants->settle_bound);
  EXPECT_TRUE(std::isfinite(*exact.constants->settle_bound));
  EXPECT_NE(exact.text.find("[certified]"), std::string::npos);
  EXPECT_NE(exact.text.find("inside"), std::string::npos);

  c.budget = *exact.constants->settle_bound / 2.0;
  EXPECT_NEAR(*report_constants(b.problem, 2, c).gain_scale, 2.0, 1e-12);

  c.delta_mode.kind = DeltaMode::Kind::surrogate;
  const ConstantsReport sampled = report_constants(b.problem, 2, c);
  EXPECT_FALSE(sampled.certified);
  EXPECT_EQ(sampled.text.find("[certified]"), std::string::npos);
  EXPECT_NE(sampled.text.find("NOT certified"), std::string::npos);

  c.delta_mode.kind = DeltaMode::Kind::exact;
  c.cappa.alpha1 = 0.1;
  const ConstantsReport outside = report_constants(b.problem, 2, c);
  EXPECT_NE(outside.text.find("OUTSIDE"), std::string::npos);
  EXPECT_NE(outside.text.find("settle_bound: unavailable"), std::string::npos);

  c.cappa.eta = 2.0 * moduli.eta_max;
  EXPECT_NE(report_constants(b.problem, 2, c).text.find("OUTSIDE the admissible interval"), std::string::npos);
}

TEST(Experiments, DeskConstantsAreNotCertified) {
  ExperimentConfig c;
  c.delta_mode.samples = 200;
  const auto b = fixtures::desk_instance();
  const ConstantsReport r = report_constants(b.problem, 20, c);
  EXPECT_FALSE(r.certified);
  EXPECT_NE(r.text.find("[sampled lower bound]"), std::string::npos);
  EXPECT_NE(r.text.find("NOT CERTIFIED"), std::string::npos);
}

TEST(Experiments, GenerateAndSolveRoundTrip) {
  fixtures::TempDir dir;
  ExperimentConfig c = small_config(dir.path());
  run_generate(c);
  const auto saved = load_bundle(dir.path() / "instance.bin");
  EXPECT_EQ(saved.problem.phi(), generate_instance(c.instance).problem.phi());
  c.instance_path = dir.path() / "instance.bin";
  run_solve(c);
  const std::string csv = slurp(dir.path() / "solve.csv");
  EXPECT_EQ(meta_value(csv, "converged"), "true");
  EXPECT_EQ(rows_of(csv).size(), 40u);
}

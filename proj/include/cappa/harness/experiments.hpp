#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cappa/analysis.hpp"
#include "cappa/harness/config.hpp"
#include "cappa/harness/manifest.hpp"
#include "cappa/problem.hpp"
#include "cappa/reference_solver.hpp"

namespace cappa::harness {

struct ExperimentContext {
  unsigned jobs = 1;
  /// When false, SVGs carry a generation timestamp. CSVs never do.
  bool deterministic = true;
};

struct ExperimentResult {
  RunManifest manifest;
  std::vector<std::filesystem::path> files;
  std::size_t diverged_runs = 0;
  std::vector<std::string> summary;  ///< console lines
};

/// An instance together with its FISTA reference and the shared stopping
/// threshold settle_tol = settle_tol_rel * ||x_ref||.
struct PreparedInstance {
  ProblemBundle bundle;
  ReferenceSolution reference;
  double settle_tol;
  std::size_t s;  ///< sparsity used for the RIP order and sparse directions
};

ProblemBundle load_or_generate(const ExperimentConfig& config);
PreparedInstance prepare_instance(ProblemBundle bundle, const ExperimentConfig& config);

/// Unit direction drawn from Rng(seed); see InitDirection.
Vector initial_direction(const SparseProblem& problem, InitDirection kind, std::uint64_t seed, std::size_t s);

/// x_ref + scale * ||x_ref|| * d (scale alone when x_ref = 0).
Vector initial_state(const SparseProblem& problem, const Vector& x_ref, InitDirection kind, const InitCondition& ic,
                     std::size_t s);

/// One solver run measured against a reference. FISTA iterations are placed
/// on the time axis at t = k * dt and capped at the integrator's step count.
struct SolverRun {
  Solver solver = Solver::cappa;
  std::vector<double> times;
  std::vector<double> errors;
  std::vector<double> residuals;  ///< ||x - z(x)|| at the configured eta (LCA: its own drive norm)
  Vector final_estimate;
  std::optional<double> settle_time;
  std::uint64_t steps = 0;
  std::uint64_t wall_clock_ns = 0;
  double final_error = 0.0;
  bool diverged = false;
};

SolverRun run_solver(Solver solver, const SparseProblem& problem, const Vector& x0, const Vector& x_ref,
                     double settle_tol, const ExperimentConfig& config, const IntegratorConfig& integrator);

struct ConstantsReport {
  std::string text;
  std::vector<std::pair<std::string, std::string>> fields;  ///< compact key/value form for CSV headers
  bool certified = false;
  std::optional<TheoryConstants> constants;
  std::optional<double> gain_scale;
};

/// Theory constants for `problem` at sparsity s with the configured CAPPA
/// parameters. A bound computed from a sampled delta is never marked certified.
ConstantsReport report_constants(const SparseProblem& problem, std::size_t s, const ExperimentConfig& config,
                                 unsigned jobs = 1);

/// Per solver x init condition error series (error_decay.csv, error_decay_summary.csv, SVG per solver).
ExperimentResult run_error_decay(const ExperimentConfig& config, const ExperimentContext& ctx = {});

/// Terminal CAPPA state vs x_ref vs x_true (recovery.csv, recovery_summary.csv, stem plot).
ExperimentResult run_signal_recovery(const ExperimentConfig& config, const ExperimentContext& ctx = {});

/// `trials` redrawn instances and initial conditions run to the shared
/// threshold. bench_trials.csv holds the deterministic per-trial outcome;
/// wall-clock goes to bench_trials_timing.csv, bench_trials_timing_summary.csv
/// and the manifest. Files named *_timing* hold measurements and are the only
/// outputs that differ between reruns of one manifest.
ExperimentResult run_wallclock_trials(const ExperimentConfig& config, const ExperimentContext& ctx = {});

/// The trial protocol at every nm_sweep point, s scaled with n.
ExperimentResult run_size_sweep(const ExperimentConfig& config, const ExperimentContext& ctx = {});

/// CAPPA error series for every dt in dt_sweep.
ExperimentResult run_dt_sweep(const ExperimentConfig& config, const ExperimentContext& ctx = {});

/// constants.txt plus manifest.
ExperimentResult run_constants(const ExperimentConfig& config, const ExperimentContext& ctx = {});

/// Saves the configured instance (instance.bin) plus manifest.
ExperimentResult run_generate(const ExperimentConfig& config, const ExperimentContext& ctx = {});

/// FISTA reference for the configured instance (solve.csv) plus manifest.
ExperimentResult run_solve(const ExperimentConfig& config, const ExperimentContext& ctx = {});

}  // namespace cappa::harness

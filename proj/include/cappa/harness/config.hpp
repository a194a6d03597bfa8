#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cappa/analysis.hpp"
#include "cappa/dynamics.hpp"
#include "cappa/integrator.hpp"
#include "cappa/problem.hpp"

namespace cappa::harness {

enum class Solver { cappa, pds, lca, ft_lca, fista };

std::string_view to_string(Solver s);
Solver parse_solver(std::string_view name);

/// How the offset x0 - x_ref of an initial condition is drawn.
///   gaussian   i.i.d. N(0,1) in all n coordinates
///   row_space  Phi^T g with g ~ N(0, I_m): no component in the null space of Phi
///   sparse     N(0,1) on s random coordinates
enum class InitDirection { gaussian, row_space, sparse };

std::string_view to_string(InitDirection d);
InitDirection parse_init_direction(std::string_view name);

/// x0 = x_ref + norm_scale * ||x_ref|| * d, d a unit direction drawn from Rng(direction_seed).
struct InitCondition {
  std::uint64_t direction_seed = 1;
  double norm_scale = 1.0;
};

struct NmPoint {
  std::size_t n;
  std::size_t m;
};

/// Everything an experiment needs. Defaults are the desk-scale experiment;
/// README.md documents the file format.
struct ExperimentConfig {
  // [instance]
  InstanceSpec instance;
  std::optional<std::filesystem::path> instance_path;  ///< load a saved bundle instead of generating

  // [cappa] [lca]
  CappaParams cappa;
  LcaParams lca;

  // [integrator]
  IntegratorConfig integrator;
  GradientOperator::Mode gradient_mode = GradientOperator::Mode::gram;

  // [experiment]
  std::vector<Solver> solvers{Solver::cappa, Solver::pds, Solver::lca, Solver::ft_lca, Solver::fista};
  std::vector<InitCondition> init_conditions{{1, 1.0}, {2, 10.0}, {3, 100.0}, {4, 1000.0}};
  InitDirection init_direction = InitDirection::gaussian;
  double settle_tol_rel = 1e-3;  ///< settle_tol = settle_tol_rel * ||x_ref||
  std::size_t trials = 100;
  std::vector<double> dt_sweep{1e-3, 1e-4, 1e-5};
  std::vector<NmPoint> nm_sweep{{400, 200}, {500, 250}, {600, 300}};
  bool keep_ratio = true;  ///< nm_sweep must keep n / m fixed
  std::uint64_t master_seed = 7;
  std::filesystem::path output_dir = "out";
  bool svg = true;

  // [reference]
  double reference_tol = 1e-12;
  std::uint64_t reference_max_iter = 200000;

  // [analysis]
  DeltaMode delta_mode;
  double zero_tol = 1e-8;
  std::optional<double> budget;

  /// Throws InvalidConfiguration describing the first violated constraint.
  void validate() const;
};

/// Parses the INI text. Unknown sections or keys, malformed values and
/// violated constraints all throw InvalidConfiguration.
ExperimentConfig parse_config(std::string_view text);

/// Reads an INI file, or the "config" field of a run manifest (*.json).
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical INI rendering; parse_config(render_config(c)) reproduces c.
/// Without `include_output_dir` the output location is left out, as it does
/// not influence any result.
std::string render_config(const ExperimentConfig& config, bool include_output_dir = true);

}  // namespace cappa::harness

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cappa/dynamics.hpp"
#include "cappa/linalg.hpp"

namespace cappa {

enum class Scheme { euler, rk4 };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view name);

struct IntegratorConfig {
  double dt = 1e-3;
  double t_max = 1.0;
  /// Stop once the field's residual is <= this. 0 disables the rule.
  double stop_residual = 0.0;
  std::size_t record_stride = 1;
  Scheme scheme = Scheme::euler;
  /// Stop at the first settle_tol crossing (requires a reference).
  bool stop_on_settle = false;
  /// Keep sampled states; times, residuals and errors are always kept.
  bool record_states = true;
  /// Throw DivergenceError on a non-finite step. When off, the trajectory ends
  /// at the last finite state and `diverged` is set.
  bool raise_on_divergence = true;

  /// Throws InvalidConfiguration unless 0 < dt <= t_max and record_stride >= 1.
  void validate() const;
  /// Number of fixed steps covering [0, t_max]: floor(t_max / dt) with a
  /// relative slack of 1e-9, so t_max = k * dt yields exactly k steps.
  std::uint64_t step_count() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;  ///< empty when record_states is off
  std::vector<double> residuals;
  std::optional<std::vector<double>> error_to_ref;  ///< ||estimate(x(t)) - x_ref||
  std::optional<std::vector<double>> lyapunov;      ///< 1/2 ||estimate(x(t)) - x_ref||^2
  Vector final_state;
  std::uint64_t wall_clock_ns = 0;
  std::uint64_t steps_taken = 0;
  bool converged = false;             ///< residual rule met
  std::optional<double> settle_time;  ///< first crossing of settle_tol, interpolated
  double final_error = 0.0;           ///< error at the final state (0 without reference)
  bool diverged = false;
};

/// Fixed-step integration from x0. Euler: x_{k+1} = x_k + dt f(x_k); rk4 is
/// the classical four-stage scheme. The initial state, every
/// `record_stride`-th step and the final state are recorded. The settle time
/// is located on the per-step error sequence and linearly interpolated
/// between the two steps that bracket the crossing.
///
/// Throws DivergenceError carrying the step index and the last finite state
/// when a step produces NaN or Inf (unless raise_on_divergence is off).
Trajectory integrate(const VectorField& field, const Vector& x0, const IntegratorConfig& config,
                     const std::optional<Vector>& reference = std::nullopt, double settle_tol = 0.0);

struct SweepPoint {
  double initial_norm;  ///< ||x0 - reference||
  std::optional<double> settle_time;
  std::uint64_t steps_taken;
};

/// integrate() for every start in `starts`, run on up to `jobs` threads.
/// A divergence is rethrown tagged with the index of the failing run.
std::vector<SweepPoint> settle_time_sweep(const VectorField& field, std::span<const Vector> starts,
                                          const IntegratorConfig& config, const Vector& reference,
                                          double settle_tol, unsigned jobs = 1);

}  // namespace cappa

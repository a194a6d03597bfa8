#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "cappa/linalg.hpp"
#include "cappa/problem.hpp"

namespace cappa {

struct ReferenceSolution {
  Vector x_ref;
  double kkt_residual = 0.0;
  std::uint64_t iterations = 0;
  double objective = 0.0;
  bool converged = false;  ///< kkt_residual <= tol was reached before max_iter
  std::uint64_t restarts = 0;
};

/// Called after every accepted iterate with (iteration, x_k, objective(x_k));
/// returning false stops the solver after that iterate.
using IterationObserver = std::function<bool(std::uint64_t, const Vector&, double)>;

/// 1/2 ||y - Phi x||^2 + lambda ||x||_1.
double objective(const SparseProblem& problem, const Vector& x);

/// Accelerated proximal gradient (FISTA) from x0 (default 0) with step 1 / ||Phi||_2^2.
/// When a candidate iterate would increase the objective the momentum is
/// reset and the step is retaken from the current iterate, so accepted
/// objectives never increase (up to rounding in the objective evaluation).
/// Stops once kkt_residual <= tol; hitting max_iter first is reported through
/// `converged`, not thrown.
ReferenceSolution fista_solve(const SparseProblem& problem, double tol, std::uint64_t max_iter,
                              const IterationObserver& observer = {}, const std::optional<Vector>& x0 = std::nullopt);

/// Plain proximal gradient (ISTA), same step and stopping rule.
ReferenceSolution ista_solve(const SparseProblem& problem, double tol, std::uint64_t max_iter,
                             const IterationObserver& observer = {});

}  // namespace cappa

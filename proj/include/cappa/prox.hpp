#pragma once

#include "cappa/linalg.hpp"
#include "cappa/problem.hpp"

namespace cappa {

/// Support threshold used by kkt_residual when none is given.
inline constexpr double kDefaultZeroTol = 1e-8;

/// Gradient of f(x) = 1/2 ||y - Phi x||^2, evaluated as Phi^T (Phi x - y).
Vector grad_f(const SparseProblem& problem, const Vector& x);

/// Elementwise sign(v_i) * max(|v_i| - tau, 0), with sign(0) = 0. Requires tau >= 0.
Vector soft_threshold(const Vector& v, double tau);

struct ProxEvaluation {
  Vector z;                     ///< prox_{eta g}(x - eta F(x))
  double fixed_point_residual;  ///< ||x - z||_2
};

/// One forward-backward step. Requires eta > 0.
ProxEvaluation prox_step(const SparseProblem& problem, const Vector& x, double eta);

/// Largest coordinatewise violation of the l1 subgradient optimality condition:
/// |g_i + lambda sign(x_i)| on |x_i| > zero_tol, max(|g_i| - lambda, 0) elsewhere,
/// with g = grad_f(x).
double kkt_residual(const SparseProblem& problem, const Vector& x, double zero_tol = kDefaultZeroTol);

/// Gradient evaluator for repeated use on one instance. In `gram` mode
/// Phi^T Phi and Phi^T y are precomputed and each call is a single n x n
/// product; `matvec` mode does two products with Phi and stores nothing.
class GradientOperator {
 public:
  enum class Mode { matvec, gram };

  explicit GradientOperator(const SparseProblem& problem, Mode mode = Mode::matvec);

  Vector operator()(const Vector& x) const;
  const SparseProblem& problem() const noexcept { return *problem_; }
  Mode mode() const noexcept { return mode_; }

 private:
  const SparseProblem* problem_;
  Mode mode_;
  Matrix gram_;
  Vector phi_t_y_;
};

/// prox_step with a caller-supplied gradient evaluator.
ProxEvaluation prox_step(const GradientOperator& grad, const Vector& x, double eta);

}  // namespace cappa

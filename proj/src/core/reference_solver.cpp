#include "cappa/reference_solver.hpp"

#include <cmath>

#include "cappa/analysis.hpp"
#include "cappa/error.hpp"
#include "cappa/prox.hpp"

namespace cappa {

namespace {

double objective_from_misfit(const SparseProblem& problem, const Vector& misfit, const Vector& x) {
  return 0.5 * misfit.squaredNorm() + problem.lambda() * x.lpNorm<1>();
}

// Largest KKT violation given the gradient at x.
double kkt_from_gradient(const Vector& x, const Vector& g, double lambda) {
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double v = std::abs(x(i)) > kDefaultZeroTol ? std::abs(g(i) + std::copysign(lambda, x(i)))
                                                      : std::max(std::abs(g(i)) - lambda, 0.0);
    worst = std::max(worst, v);
  }
  return worst;
}

// 1 / ||Phi||^2, shrunk slightly so that power-iteration error never pushes it past the descent limit.
double safe_step(const Matrix& phi) { return 1.0 / (std::pow(spectral_norm(phi), 2) * (1.0 + 1e-8)); }

void check_arguments(double tol, std::uint64_t max_iter) {
  if (!(tol > 0.0)) throw InvalidArgument("reference solver: tol must be > 0");
  if (max_iter == 0) throw InvalidArgument("reference solver: max_iter must be >= 1");
}

}  // namespace

double objective(const SparseProblem& problem, const Vector& x) {
  if (x.size() != problem.n()) throw InvalidArgument("objective: vector length differs from n");
  return objective_from_misfit(problem, problem.phi() * x - problem.y(), x);
}

ReferenceSolution fista_solve(const SparseProblem& problem, double tol, std::uint64_t max_iter,
                              const IterationObserver& observer, const std::optional<Vector>& x0) {
  check_arguments(tol, max_iter);
  if (x0 && (x0->size() != problem.n() || !x0->allFinite()))
    throw InvalidArgument("fista_solve: x0 must be a finite vector of length n");
  const Matrix& phi = problem.phi();
  const double step = safe_step(phi);
  const double thresh = problem.lambda() * step;

  Vector x = x0 ? *x0 : Vector::Zero(problem.n());
  Vector misfit_x = phi * x - problem.y();
  double obj_x = objective_from_misfit(problem, misfit_x, x);
  Vector y = x, misfit_y = misfit_x;
  double t = 1.0;

  ReferenceSolution out;
  Vector grad_x = phi.transpose() * misfit_x;
  out.kkt_residual = kkt_from_gradient(x, grad_x, problem.lambda());
  std::uint64_t k = 0;
  while (out.kkt_residual > tol && k < max_iter) {
    Vector g = phi.transpose() * misfit_y;
    Vector x_new = soft_threshold(y - step * g, thresh);
    Vector misfit_new = phi * x_new - problem.y();
    double obj_new = objective_from_misfit(problem, misfit_new, x_new);
    if (obj_new > obj_x) {
      // Momentum restart: a plain proximal step from x cannot increase the objective.
      ++out.restarts;
      t = 1.0;
      x_new = soft_threshold(x - step * grad_x, thresh);
      misfit_new = phi * x_new - problem.y();
      obj_new = objective_from_misfit(problem, misfit_new, x_new);
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_new;
    y = x_new + beta * (x_new - x);
    misfit_y = misfit_new + beta * (misfit_new - misfit_x);
    x.swap(x_new);
    misfit_x.swap(misfit_new);
    obj_x = obj_new;
    t = t_new;
    ++k;

    grad_x = phi.transpose() * misfit_x;
    out.kkt_residual = kkt_from_gradient(x, grad_x, problem.lambda());
    if (observer && !observer(k, x, obj_x)) break;
  }
  out.iterations = k;
  out.converged = out.kkt_residual <= tol;
  out.objective = obj_x;
  out.x_ref = std::move(x);
  return out;
}

ReferenceSolution ista_solve(const SparseProblem& problem, double tol, std::uint64_t max_iter,
                             const IterationObserver& observer) {
  check_arguments(tol, max_iter);
  const Matrix& phi = problem.phi();
  const double step = safe_step(phi);

  Vector x = Vector::Zero(problem.n());
  Vector misfit = -problem.y();
  Vector g = phi.transpose() * misfit;
  ReferenceSolution out;
  out.kkt_residual = kkt_from_gradient(x, g, problem.lambda());
  std::uint64_t k = 0;
  while (out.kkt_residual > tol && k < max_iter) {
    x = soft_threshold(x - step * g, problem.lambda() * step);
    misfit = phi * x - problem.y();
    g = phi.transpose() * misfit;
    ++k;
    out.kkt_residual = kkt_from_gradient(x, g, problem.lambda());
    if (observer && !observer(k, x, objective_from_misfit(problem, misfit, x))) break;
  }
  out.iterations = k;
  out.converged = out.kkt_residual <= tol;
  out.objective = objective_from_misfit(problem, misfit, x);
  out.x_ref = std::move(x);
  return out;
}

}  // namespace cappa

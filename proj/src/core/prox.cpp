#include "cappa/prox.hpp"

#include <cmath>
#include <string>

#include "cappa/error.hpp"

namespace cappa {

namespace {

void check_length(const SparseProblem& problem, const Vector& x, const char* op) {
  if (x.size() != problem.n()) {
    throw InvalidArgument(std::string(op) + ": vector has length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(problem.n()));
  }
}

}  // namespace

Vector grad_f(const SparseProblem& problem, const Vector& x) {
  check_length(problem, x, "grad_f");
  const Vector misfit = problem.phi() * x - problem.y();
  return problem.phi().transpose() * misfit;
}

Vector soft_threshold(const Vector& v, double tau) {
  if (!(tau >= 0.0)) throw InvalidArgument("soft_threshold: tau must be >= 0");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i)) - tau;
    out(i) = mag > 0.0 ? std::copysign(mag, v(i)) : 0.0;
  }
  return out;
}

GradientOperator::GradientOperator(const SparseProblem& problem, Mode mode) : problem_(&problem), mode_(mode) {
  if (mode_ == Mode::gram) {
    gram_ = problem.phi().transpose() * problem.phi();
    phi_t_y_ = problem.phi().transpose() * problem.y();
  }
}

Vector GradientOperator::operator()(const Vector& x) const {
  if (mode_ == Mode::matvec) return grad_f(*problem_, x);
  check_length(*problem_, x, "GradientOperator");
  return gram_ * x - phi_t_y_;
}

ProxEvaluation prox_step(const GradientOperator& grad, const Vector& x, double eta) {
  if (!(eta > 0.0)) throw InvalidArgument("prox_step: eta must be > 0");
  const Vector forward = x - eta * grad(x);
  ProxEvaluation out{soft_threshold(forward, eta * grad.problem().lambda()), 0.0};
  out.fixed_point_residual = (x - out.z).norm();
  return out;
}

ProxEvaluation prox_step(const SparseProblem& problem, const Vector& x, double eta) {
  return prox_step(GradientOperator(problem), x, eta);
}

double kkt_residual(const SparseProblem& problem, const Vector& x, double zero_tol) {
  if (!(zero_tol > 0.0)) throw InvalidArgument("kkt_residual: zero_tol must be > 0");
  const Vector g = grad_f(problem, x);
  const double lambda = problem.lambda();
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double violation = std::abs(x(i)) > zero_tol ? std::abs(g(i) + std::copysign(lambda, x(i)))
                                                       : std::max(std::abs(g(i)) - lambda, 0.0);
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace cappa

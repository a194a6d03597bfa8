#include "cappa/dynamics.hpp"

#include <cmath>

#include "cappa/error.hpp"

namespace cappa {

void CappaParams::validate() const {
  if (!(kappa1 > 0.0) || !(kappa2 > 0.0)) throw InvalidConfiguration("CAPPA gains kappa1, kappa2 must be > 0");
  if (!(alpha1 > 0.0 && alpha1 < 1.0)) throw InvalidConfiguration("CAPPA exponent alpha1 must lie in (0, 1)");
  if (!(alpha2 > 1.0) || !std::isfinite(alpha2)) throw InvalidConfiguration("CAPPA exponent alpha2 must be > 1");
  if (!(eta > 0.0)) throw InvalidConfiguration("CAPPA step eta must be > 0");
}

void LcaParams::validate() const {
  if (!(tau > 0.0)) throw InvalidConfiguration("LCA time constant tau must be > 0");
  if (!(threshold > 0.0)) throw InvalidConfiguration("LCA threshold must be > 0");
  if (!(ft_exponent > 0.0 && ft_exponent < 1.0)) throw InvalidConfiguration("LCA ft_exponent must lie in (0, 1)");
}

Vector cappa_field(const Vector& residual, const CappaParams& params, double singular_tol) {
  const double norm = residual.norm();
  if (norm <= singular_tol) return Vector::Zero(residual.size());
  const double gain = params.kappa1 * std::pow(norm, params.alpha1 - 1.0) +
                      params.kappa2 * std::pow(norm, params.alpha2 - 1.0);
  return -gain * residual;
}

Vector cappa_rhs(const SparseProblem& problem, const CappaParams& params, const Vector& x, double singular_tol) {
  params.validate();
  const ProxEvaluation pe = prox_step(problem, x, params.eta);
  return cappa_field(x - pe.z, params, singular_tol);
}

Vector nominal_pds_rhs(const SparseProblem& problem, double eta, const Vector& x) {
  const ProxEvaluation pe = prox_step(problem, x, eta);
  return pe.z - x;
}

namespace {

// Returns the standard drive tau * du and writes a.
Vector lca_drive(const GradientOperator& grad, const LcaParams& params, const Vector& u, Vector& a) {
  a = soft_threshold(u, params.threshold);
  // Phi^T y - (Phi^T Phi - I) a = a - grad_f(a)
  return a - grad(a) - u;
}

Vector lca_velocity(const Vector& drive, const LcaParams& params, LcaVariant variant) {
  Vector du = drive / params.tau;
  if (variant == LcaVariant::finite_time) {
    const double norm = du.norm();
    if (norm == 0.0) return du;
    du *= std::pow(norm, params.ft_exponent - 1.0);
  }
  return du;
}

}  // namespace

LcaEvaluation lca_rhs(const SparseProblem& problem, const LcaParams& params, const Vector& u, LcaVariant variant) {
  params.validate();
  LcaEvaluation out;
  const Vector drive = lca_drive(GradientOperator(problem), params, u, out.a);
  out.du = lca_velocity(drive, params, variant);
  return out;
}

CappaFlow::CappaFlow(const SparseProblem& problem, CappaParams params, GradientOperator::Mode mode,
                     double singular_tol)
    : grad_(problem, mode), params_(params), singular_tol_(singular_tol) {
  params_.validate();
}

double CappaFlow::evaluate(const Vector& x, Vector& velocity) const {
  const ProxEvaluation pe = prox_step(grad_, x, params_.eta);
  velocity = cappa_field(x - pe.z, params_, singular_tol_);
  return pe.fixed_point_residual;
}

ProximalFlow::ProximalFlow(const SparseProblem& problem, double eta, GradientOperator::Mode mode)
    : grad_(problem, mode), eta_(eta) {
  if (!(eta > 0.0)) throw InvalidConfiguration("proximal flow step eta must be > 0");
}

double ProximalFlow::evaluate(const Vector& x, Vector& velocity) const {
  const ProxEvaluation pe = prox_step(grad_, x, eta_);
  velocity = pe.z - x;
  return pe.fixed_point_residual;
}

LcaFlow::LcaFlow(const SparseProblem& problem, LcaParams params, LcaVariant variant, GradientOperator::Mode mode)
    : grad_(problem, mode), params_(params), variant_(variant) {
  params_.validate();
}

double LcaFlow::evaluate(const Vector& u, Vector& velocity) const {
  Vector a;
  const Vector drive = lca_drive(grad_, params_, u, a);
  velocity = lca_velocity(drive, params_, variant_);
  return drive.norm();
}

Vector LcaFlow::estimate(const Vector& u) const { return soft_threshold(u, params_.threshold); }

FunctionFlow::FunctionFlow(Rhs rhs, Residual residual, std::string name)
    : rhs_(std::move(rhs)), residual_(std::move(residual)), name_(std::move(name)) {}

double FunctionFlow::evaluate(const Vector& x, Vector& velocity) const {
  velocity = rhs_(x);
  return residual_ ? residual_(x) : velocity.norm();
}

}  // namespace cappa

#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "cappa/linalg.hpp"
#include "cappa/problem.hpp"
#include "cappa/prox.hpp"

namespace cappa {

/// Below this fixed-point residual norm the CAPPA field is exactly zero.
inline constexpr double kDefaultSingularTol = 1e-14;

/// Gains, exponents and prox step of the fixed-time flow
///   xdot = -kappa1 r / ||r||^(1-alpha1) - kappa2 r / ||r||^(1-alpha2),  r = x - z(x).
/// Defaults are the desk-scale experiment values.
struct CappaParams {
  double kappa1 = 50.0;
  double kappa2 = 50.0;
  double alpha1 = 0.1;
  double alpha2 = 1.1;
  double eta = 0.4;

  /// Throws InvalidConfiguration unless kappa1, kappa2, eta > 0, 0 < alpha1 < 1 < alpha2.
  void validate() const;
};

/// Soft-threshold LCA baseline. These are benchmark stand-ins in the standard
/// form; they do not reproduce any particular published parameterization.
struct LcaParams {
  double tau = 1.0;
  double threshold = 0.05;
  double ft_exponent = 0.5;  ///< finite-time variant only

  void validate() const;
};

enum class LcaVariant { standard, finite_time };

/// The CAPPA velocity for a given fixed-point residual r. Does not validate
/// `params`, so limiting cases (kappa2 = 0, alpha1 -> 1) can be evaluated.
Vector cappa_field(const Vector& residual, const CappaParams& params, double singular_tol = kDefaultSingularTol);

Vector cappa_rhs(const SparseProblem& problem, const CappaParams& params, const Vector& x,
                 double singular_tol = kDefaultSingularTol);

/// xdot = -(x - z(x)).
Vector nominal_pds_rhs(const SparseProblem& problem, double eta, const Vector& x);

struct LcaEvaluation {
  Vector du;  ///< internal-state velocity
  Vector a;   ///< thresholded output soft_threshold(u, threshold)
};

/// du = (Phi^T y - u - (Phi^T Phi - I) a) / tau. The finite-time variant
/// returns du * ||du||^(ft_exponent - 1) (zero when du = 0).
LcaEvaluation lca_rhs(const SparseProblem& problem, const LcaParams& params, const Vector& u,
                      LcaVariant variant = LcaVariant::standard);

/// Autonomous vector field consumed by the integrator.
class VectorField {
 public:
  virtual ~VectorField() = default;

  /// Writes the field at `state` into `velocity`; returns the field's
  /// stationarity residual at `state` (||x - z(x)|| for the proximal flows).
  virtual double evaluate(const Vector& state, Vector& velocity) const = 0;

  /// The signal estimate represented by `state`.
  virtual Vector estimate(const Vector& state) const { return state; }

  virtual std::string_view name() const = 0;
};

class CappaFlow final : public VectorField {
 public:
  CappaFlow(const SparseProblem& problem, CappaParams params,
            GradientOperator::Mode mode = GradientOperator::Mode::matvec,
            double singular_tol = kDefaultSingularTol);

  double evaluate(const Vector& x, Vector& velocity) const override;
  std::string_view name() const override { return "cappa"; }
  const CappaParams& params() const noexcept { return params_; }

 private:
  GradientOperator grad_;
  CappaParams params_;
  double singular_tol_;
};

class ProximalFlow final : public VectorField {
 public:
  ProximalFlow(const SparseProblem& problem, double eta, GradientOperator::Mode mode = GradientOperator::Mode::matvec);

  double evaluate(const Vector& x, Vector& velocity) const override;
  std::string_view name() const override { return "pds"; }

 private:
  GradientOperator grad_;
  double eta_;
};

/// LCA on the internal state u; the residual is ||tau * du|| of the standard
/// drive and the estimate is the thresholded output.
class LcaFlow final : public VectorField {
 public:
  LcaFlow(const SparseProblem& problem, LcaParams params, LcaVariant variant,
          GradientOperator::Mode mode = GradientOperator::Mode::matvec);

  double evaluate(const Vector& u, Vector& velocity) const override;
  Vector estimate(const Vector& u) const override;
  std::string_view name() const override { return variant_ == LcaVariant::standard ? "lca" : "ft_lca"; }

 private:
  GradientOperator grad_;
  LcaParams params_;
  LcaVariant variant_;
};

/// Wraps plain callables; used for scalar test fields.
class FunctionFlow final : public VectorField {
 public:
  using Rhs = std::function<Vector(const Vector&)>;
  using Residual = std::function<double(const Vector&)>;

  /// Without `residual` the residual is the norm of the field.
  explicit FunctionFlow(Rhs rhs, Residual residual = {}, std::string name = "function");

  double evaluate(const Vector& x, Vector& velocity) const override;
  std::string_view name() const override { return name_; }

 private:
  Rhs rhs_;
  Residual residual_;
  std::string name_;
};

}  // namespace cappa

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cappa/error.hpp"
#include "cappa/integrator.hpp"
#include "cappa/prox.hpp"
#include "cappa/reference_solver.hpp"
#include "test_support.hpp"

using namespace cappa;

namespace {

// Neumaier-compensated objective, independent of the library's evaluation.
double objective_compensated(const SparseProblem& p, const Vector& x) {
  double sum = 0.0, comp = 0.0;
  auto add = [&](double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  };
  for (Index i = 0; i < p.m(); ++i) {
    double row = 0.0, rc = 0.0;
    for (Index j = 0; j < p.n(); ++j) {
      const double v = p.phi()(i, j) * x(j);
      const double t = row + v;
      rc += std::abs(row) >= std::abs(v) ? (row - t) + v : (v - t) + row;
      row = t;
    }
    const double res = p.y()(i) - (row + rc);
    add(0.5 * res * res);
  }
  for (Index j = 0; j < p.n(); ++j) add(p.lambda() * std::abs(x(j)));
  return sum + comp;
}

}  // namespace

TEST(Objective, Examples) {
  const auto b = generate_gaussian_instance(40, 20, 3, 0.0, 0.1, 2);
  const auto& p = b.problem;
  EXPECT_NEAR(objective(p, Vector::Zero(40)), 0.5 * p.y().squaredNorm(), 1e-15 * p.y().squaredNorm());
  EXPECT_NEAR(objective(p, b.truth->x_true), 0.1 * b.truth->x_true.lpNorm<1>(), 1e-14);
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vector x = fixtures::random_vector(40, rng);
    EXPECT_NEAR(objective(p, x), objective_compensated(p, x), 1e-12 * objective_compensated(p, x));
  }
}

TEST(Fista, IdentityClosedForm) {
  Vector y(5);
  y << 3.0, -0.2, 0.0, 1.0, -4.0;
  const auto p = fixtures::identity_problem(y, 0.5);
  const auto sol = fista_solve(p, 1e-12, 1000);
  EXPECT_TRUE(sol.converged);
  EXPECT_LE(sol.iterations, 10u);
  EXPECT_LE((sol.x_ref - soft_threshold(y, 0.5)).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Fista, DeskInstanceIsOptimal) {
  const auto b = fixtures::desk_instance();
  const auto sol = fista_solve(b.problem, 1e-12, 100000);
  ASSERT_TRUE(sol.converged);
  EXPECT_LE(sol.kkt_residual, 1e-10);
  EXPECT_LE(kkt_residual(b.problem, sol.x_ref), 1e-10);
  EXPECT_LE(sol.objective, objective(b.problem, b.truth->x_true));
  EXPECT_DOUBLE_EQ(sol.objective, objective(b.problem, sol.x_ref));

  // No perturbation of size <= 1e-2 lowers the objective.
  Rng rng(4);
  const double f0 = objective_compensated(b.problem, sol.x_ref);
  for (int k = 0; k < 10000; ++k) {
    Vector d = fixtures::random_vector(b.problem.n(), rng);
    d *= 1e-2 * rng.uniform() / d.norm();
    ASSERT_GE(objective(b.problem, sol.x_ref + d), f0 - 1e-12) << "perturbation " << k;
  }
}

TEST(Fista, ObjectiveNeverIncreasesProperty) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto p = fixtures::random_problem(15, 40, seed, 0.05);
    double prev = INFINITY;
    bool monotone = true;
    const auto sol = fista_solve(p, 1e-10, 50000, [&](std::uint64_t, const Vector&, double obj) {
      if (obj > prev + 1e-14 * std::abs(prev)) monotone = false;
      prev = obj;
      return true;
    });
    EXPECT_TRUE(monotone) << "seed " << seed;
    EXPECT_TRUE(sol.converged);
  }
}

TEST(Fista, FasterThanIstaAndSameMinimizer) {
  const auto b = generate_gaussian_instance(100, 50, 5, 0.01, 0.05, 3);
  const auto fast = fista_solve(b.problem, 1e-9, 200000);
  const auto slow = ista_solve(b.problem, 1e-9, 200000);
  ASSERT_TRUE(fast.converged);
  ASSERT_TRUE(slow.converged);
  EXPECT_LT(fast.iterations, slow.iterations);
  EXPECT_LE((fast.x_ref - slow.x_ref).norm(), 1e-6 * (1 + fast.x_ref.norm()));
}

TEST(Fista, ReportsNonConvergence) {
  const auto b = fixtures::desk_instance();
  const auto sol = fista_solve(b.problem, 1e-12, 3);
  EXPECT_FALSE(sol.converged);
  EXPECT_EQ(sol.iterations, 3u);
  EXPECT_GT(sol.kkt_residual, 1e-12);
}

TEST(Fista, AgreesWithLongHorizonFlow) {
  // The CAPPA flow with a near-linear small exponent is resolved by Euler at
  // dt = 1e-3 and lands on the FISTA minimizer with the same support.
  const auto b = fixtures::desk_instance();
  const auto& p = b.problem;
  const auto sol = fista_solve(p, 1e-12, 100000);
  const CappaFlow flow(p, CappaParams{50, 50, 0.9, 1.1, 0.4}, GradientOperator::Mode::gram);
  IntegratorConfig cfg{1e-3, 3.0};
  cfg.record_states = false;
  const auto traj = integrate(flow, Vector::Zero(p.n()), cfg);
  EXPECT_LE((sol.x_ref - traj.final_state).norm(), 1e-4 * (1 + sol.x_ref.norm()));
  for (Index i = 0; i < p.n(); ++i)
    EXPECT_EQ(std::abs(sol.x_ref(i)) > 1e-8, std::abs(traj.final_state(i)) > 1e-8) << "coordinate " << i;
}

TEST(Fista, WarmStartAndEarlyStop) {
  const auto b = generate_gaussian_instance(100, 50, 5, 0.01, 0.05, 3);
  const auto cold = fista_solve(b.problem, 1e-10, 100000);
  const auto warm = fista_solve(b.problem, 1e-10, 100000, {}, cold.x_ref);
  EXPECT_EQ(warm.iterations, 0u);
  EXPECT_EQ(warm.x_ref, cold.x_ref);

  std::uint64_t seen = 0;
  const auto stopped = fista_solve(b.problem, 1e-10, 100000, [&](std::uint64_t k, const Vector&, double) {
    seen = k;
    return k < 5;
  });
  EXPECT_EQ(seen, 5u);
  EXPECT_EQ(stopped.iterations, 5u);
  EXPECT_FALSE(stopped.converged);
  EXPECT_THROW(fista_solve(b.problem, 1e-10, 10, {}, Vector::Zero(3)), InvalidArgument);
}

#include "cappa/integrator.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "cappa/error.hpp"
#include "cappa/parallel.hpp"

namespace cappa {

std::string_view to_string(Scheme s) { return s == Scheme::euler ? "euler" : "rk4"; }

Scheme parse_scheme(std::string_view name) {
  if (name == "euler") return Scheme::euler;
  if (name == "rk4") return Scheme::rk4;
  throw InvalidConfiguration("unknown integration scheme '" + std::string(name) + "'");
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidConfiguration("integrator dt must be > 0");
  if (!(t_max >= dt) || !std::isfinite(t_max)) throw InvalidConfiguration("integrator requires dt <= t_max");
  if (record_stride < 1) throw InvalidConfiguration("record_stride must be >= 1");
  if (!(stop_residual >= 0.0)) throw InvalidConfiguration("stop_residual must be >= 0");
}

std::uint64_t IntegratorConfig::step_count() const {
  return static_cast<std::uint64_t>(std::floor(t_max / dt * (1.0 + 1e-9)));
}

namespace {

class Recorder {
 public:
  Recorder(Trajectory& traj, const VectorField& field, const IntegratorConfig& config,
           const std::optional<Vector>& reference, double settle_tol)
      : traj_(traj), field_(field), config_(config), reference_(reference), settle_tol_(settle_tol) {
    if (reference_) {
      traj_.error_to_ref.emplace();
      traj_.lyapunov.emplace();
    }
  }

  // Error of the state at step k; tracks the settle crossing.
  double observe(std::uint64_t k, const Vector& x) {
    if (!reference_) return 0.0;
    const double err = (field_.estimate(x) - *reference_).norm();
    const double t = static_cast<double>(k) * config_.dt;
    if (!traj_.settle_time && err <= settle_tol_) {
      if (k == 0 || !(prev_error_ > settle_tol_)) {
        traj_.settle_time = t;
      } else {
        const double frac = (prev_error_ - settle_tol_) / (prev_error_ - err);
        traj_.settle_time = t - config_.dt + frac * config_.dt;
      }
    }
    prev_error_ = err;
    return err;
  }

  void record(std::uint64_t k, const Vector& x, double residual, double err) {
    traj_.times.push_back(static_cast<double>(k) * config_.dt);
    traj_.residuals.push_back(residual);
    if (config_.record_states) traj_.states.push_back(x);
    if (reference_) {
      traj_.error_to_ref->push_back(err);
      traj_.lyapunov->push_back(0.5 * err * err);
    }
  }

 private:
  Trajectory& traj_;
  const VectorField& field_;
  const IntegratorConfig& config_;
  const std::optional<Vector>& reference_;
  double settle_tol_;
  double prev_error_ = 0.0;
};

}  // namespace

Trajectory integrate(const VectorField& field, const Vector& x0, const IntegratorConfig& config,
                     const std::optional<Vector>& reference, double settle_tol) {
  config.validate();
  if (reference && reference->size() != x0.size()) throw InvalidArgument("integrate: reference length differs from x0");
  if (!(settle_tol >= 0.0)) throw InvalidArgument("integrate: settle_tol must be >= 0");
  if (!x0.allFinite()) throw InvalidArgument("integrate: x0 is not finite");

  const auto start = std::chrono::steady_clock::now();
  Trajectory traj;
  Recorder recorder(traj, field, config, reference, settle_tol);

  const std::uint64_t total = config.step_count();
  const double dt = config.dt;
  Vector x = x0;
  Vector v(x.size()), next(x.size());
  Vector k2(x.size()), k3(x.size()), k4(x.size());

  double residual = field.evaluate(x, v);
  double err = recorder.observe(0, x);
  recorder.record(0, x, residual, err);

  std::uint64_t k = 0;
  for (;;) {
    if (config.stop_residual > 0.0 && residual <= config.stop_residual) {
      traj.converged = true;
      break;
    }
    if (config.stop_on_settle && traj.settle_time) break;
    if (k == total) break;

    if (config.scheme == Scheme::euler) {
      next = x + dt * v;
    } else {
      field.evaluate(x + 0.5 * dt * v, k2);
      field.evaluate(x + 0.5 * dt * k2, k3);
      field.evaluate(x + dt * k3, k4);
      next = x + (dt / 6.0) * (v + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!next.allFinite()) {
      if (config.raise_on_divergence) throw DivergenceError(k + 1, x);
      traj.diverged = true;
      if (traj.times.empty() || traj.times.back() != static_cast<double>(k) * dt) recorder.record(k, x, residual, err);
      break;
    }
    x.swap(next);
    ++k;

    residual = field.evaluate(x, v);
    err = recorder.observe(k, x);
    const bool last = k == total || (config.stop_on_settle && traj.settle_time) ||
                      (config.stop_residual > 0.0 && residual <= config.stop_residual);
    if (k % config.record_stride == 0 || last) recorder.record(k, x, residual, err);
  }
  if (config.stop_residual == 0.0 && residual == 0.0) traj.converged = true;

  traj.steps_taken = k;
  traj.final_error = err;
  traj.final_state = std::move(x);
  traj.wall_clock_ns = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count());
  return traj;
}

std::vector<SweepPoint> settle_time_sweep(const VectorField& field, std::span<const Vector> starts,
                                          const IntegratorConfig& config, const Vector& reference,
                                          double settle_tol, unsigned jobs) {
  if (starts.empty()) throw InvalidArgument("settle_time_sweep: no initial conditions");
  if (!(settle_tol > 0.0)) throw InvalidArgument("settle_time_sweep: settle_tol must be > 0");
  IntegratorConfig run_config = config;
  run_config.record_states = false;
  std::vector<SweepPoint> out(starts.size());
  const std::optional<Vector> ref = reference;
  parallel_for(starts.size(), jobs, [&](std::size_t i) {
    try {
      const Trajectory traj = integrate(field, starts[i], run_config, ref, settle_tol);
      out[i] = SweepPoint{(starts[i] - reference).norm(), traj.settle_time, traj.steps_taken};
    } catch (const DivergenceError& e) {
      throw e.tagged(i);
    }
  });
  return out;
}

}  // namespace cappa

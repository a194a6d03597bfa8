#include "cappa/harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <map>
#include <memory>
#include <numeric>

#include <fmt/format.h>

#include "cappa/dynamics.hpp"
#include "cappa/error.hpp"
#include "cappa/harness/csv.hpp"
#include "cappa/harness/svg.hpp"
#include "cappa/integrator.hpp"
#include "cappa/parallel.hpp"
#include "cappa/prox.hpp"
#include "cappa/rng.hpp"

namespace cappa::harness {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point start) {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

std::size_t support_size(const Vector& x, double tol) {
  return static_cast<std::size_t>((x.array().abs() > tol).count());
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Series make_series(std::string label, std::vector<double> x, std::vector<double> y,
                   SeriesStyle style = SeriesStyle::line) {
  Series s;
  s.label = std::move(label);
  s.x = std::move(x);
  s.y = std::move(y);
  s.style = style;
  return s;
}

std::string num(double v) { return format_double(v); }

Cell opt_cell(const std::optional<double>& v) { return v ? Cell(*v) : Cell(Empty{}); }

std::unique_ptr<VectorField> make_flow(Solver solver, const SparseProblem& problem, const ExperimentConfig& config) {
  switch (solver) {
    case Solver::cappa: return std::make_unique<CappaFlow>(problem, config.cappa, config.gradient_mode);
    case Solver::pds: return std::make_unique<ProximalFlow>(problem, config.cappa.eta, config.gradient_mode);
    case Solver::lca:
      return std::make_unique<LcaFlow>(problem, config.lca, LcaVariant::standard, config.gradient_mode);
    case Solver::ft_lca:
      return std::make_unique<LcaFlow>(problem, config.lca, LcaVariant::finite_time, config.gradient_mode);
    case Solver::fista: break;
  }
  throw InvalidArgument("make_flow: FISTA is not a vector field");
}

// Tracks the first crossing of settle_tol on a per-step error sequence with
// the same interpolation rule as the integrator.
class SettleTracker {
 public:
  SettleTracker(double tol, double dt) : tol_(tol), dt_(dt) {}
  void observe(std::uint64_t k, double err) {
    if (!settle_ && err <= tol_) {
      const double t = static_cast<double>(k) * dt_;
      if (k == 0 || !(prev_ > tol_)) {
        settle_ = t;
      } else {
        settle_ = t - dt_ + (prev_ - tol_) / (prev_ - err) * dt_;
      }
    }
    prev_ = err;
  }
  const std::optional<double>& settle_time() const { return settle_; }

 private:
  double tol_, dt_;
  double prev_ = 0.0;
  std::optional<double> settle_;
};

SolverRun run_fista(const SparseProblem& problem, const Vector& x0, const Vector& x_ref, double settle_tol,
                    const ExperimentConfig& config, const IntegratorConfig& integrator) {
  SolverRun out;
  out.solver = Solver::fista;
  const auto start = Clock::now();
  const double dt = integrator.dt;
  SettleTracker tracker(settle_tol, dt);
  auto record = [&](std::uint64_t k, const Vector& x, double err) {
    out.times.push_back(static_cast<double>(k) * dt);
    out.errors.push_back(err);
    out.residuals.push_back(prox_step(problem, x, config.cappa.eta).fixed_point_residual);
  };

  double err = (x0 - x_ref).norm();
  tracker.observe(0, err);
  record(0, x0, err);
  std::uint64_t last_k = 0, last_recorded = 0;
  Vector last_x = x0;
  const bool done = integrator.stop_on_settle && tracker.settle_time();
  if (!done) {
    (void)fista_solve(
        problem, config.reference_tol, integrator.step_count(),
        [&](std::uint64_t k, const Vector& x, double) {
          err = (x - x_ref).norm();
          tracker.observe(k, err);
          last_k = k;
          last_x = x;
          if (k % integrator.record_stride == 0) {
            record(k, x, err);
            last_recorded = k;
          }
          return !(integrator.stop_on_settle && tracker.settle_time());
        },
        x0);
  }
  out.wall_clock_ns = elapsed_ns(start);
  if (last_k != last_recorded) record(last_k, last_x, err);
  out.final_estimate = std::move(last_x);
  out.settle_time = tracker.settle_time();
  out.steps = last_k;
  out.final_error = err;
  return out;
}

RunManifest make_manifest(std::string experiment, const ExperimentConfig& config, const ConstantsReport& constants) {
  RunManifest m;
  m.experiment = std::move(experiment);
  m.config = render_config(config, false);
  m.output_dir = config.output_dir.generic_string();
  m.version = std::string(library_version());
  m.constants = constants.text;
  m.host = host_description();
  return m;
}

void add_header(CsvTable& table, const RunManifest& manifest, const ConstantsReport& constants) {
  table.add_meta("experiment", manifest.experiment);
  table.add_meta("manifest_sha256", manifest.hash());
  table.add_meta("library_version", manifest.version);
  for (const auto& [k, v] : constants.fields) table.add_meta("constants." + k, v);
}

PlotSpec plot(const ExperimentContext& ctx, std::string title, std::string x_label, std::string y_label,
              bool log_y = false, bool log_x = false) {
  PlotSpec spec;
  spec.title = std::move(title);
  spec.x_label = std::move(x_label);
  spec.y_label = std::move(y_label);
  spec.log_x = log_x;
  spec.log_y = log_y;
  if (!ctx.deterministic) spec.timestamp = utc_timestamp();
  return spec;
}

class Outputs {
 public:
  Outputs(const ExperimentConfig& config, ExperimentResult& result) : config_(config), result_(result) {}

  void csv(const std::string& name, const CsvTable& table) {
    const auto path = config_.output_dir / name;
    table.write(path);
    result_.files.push_back(path);
  }
  void svg(const std::string& name, const PlotSpec& spec, const std::vector<Series>& series) {
    if (!config_.svg) return;
    const auto path = config_.output_dir / name;
    write_text_file(path, render_svg(spec, series));
    result_.files.push_back(path);
  }
  void manifest() {
    const auto path = config_.output_dir / (result_.manifest.experiment + "_manifest.json");
    result_.manifest.write(path);
    result_.files.push_back(path);
  }

 private:
  const ExperimentConfig& config_;
  ExperimentResult& result_;
};

std::size_t sparsity_of(const ProblemBundle& bundle, const ExperimentConfig& config) {
  if (bundle.truth && bundle.truth->s > 0) return bundle.truth->s;
  return std::min<std::size_t>(config.instance.s, static_cast<std::size_t>(bundle.problem.m()));
}

}  // namespace

ProblemBundle load_or_generate(const ExperimentConfig& config) {
  if (config.instance_path) return load_bundle(*config.instance_path);
  return generate_instance(config.instance);
}

PreparedInstance prepare_instance(ProblemBundle bundle, const ExperimentConfig& config) {
  ReferenceSolution ref = fista_solve(bundle.problem, config.reference_tol, config.reference_max_iter);
  const double norm = ref.x_ref.norm();
  const double tol = config.settle_tol_rel * (norm > 0.0 ? norm : 1.0);
  const std::size_t s = sparsity_of(bundle, config);
  return PreparedInstance{std::move(bundle), std::move(ref), tol, s};
}

Vector initial_direction(const SparseProblem& problem, InitDirection kind, std::uint64_t seed, std::size_t s) {
  Rng rng(seed);
  const Index n = problem.n();
  Vector d = Vector::Zero(n);
  switch (kind) {
    case InitDirection::gaussian:
      for (Index i = 0; i < n; ++i) d(i) = rng.normal();
      break;
    case InitDirection::row_space: {
      Vector g(problem.m());
      for (Index i = 0; i < problem.m(); ++i) g(i) = rng.normal();
      d = problem.phi().transpose() * g;
      break;
    }
    case InitDirection::sparse:
      for (std::size_t idx : rng.sample_without_replacement(static_cast<std::size_t>(n), std::max<std::size_t>(s, 1)))
        d(static_cast<Index>(idx)) = rng.normal();
      break;
  }
  const double norm = d.norm();
  if (!(norm > 0.0)) throw InvalidArgument("initial_direction: degenerate direction");
  return d / norm;
}

Vector initial_state(const SparseProblem& problem, const Vector& x_ref, InitDirection kind, const InitCondition& ic,
                     std::size_t s) {
  const double ref_norm = x_ref.norm();
  const double radius = ic.norm_scale * (ref_norm > 0.0 ? ref_norm : 1.0);
  if (radius == 0.0) return x_ref;
  return x_ref + radius * initial_direction(problem, kind, ic.direction_seed, s);
}

SolverRun run_solver(Solver solver, const SparseProblem& problem, const Vector& x0, const Vector& x_ref,
                     double settle_tol, const ExperimentConfig& config, const IntegratorConfig& integrator) {
  if (solver == Solver::fista) return run_fista(problem, x0, x_ref, settle_tol, config, integrator);
  const auto flow = make_flow(solver, problem, config);
  IntegratorConfig cfg = integrator;
  cfg.record_states = false;
  cfg.raise_on_divergence = false;
  Trajectory traj = integrate(*flow, x0, cfg, x_ref, settle_tol);
  SolverRun out;
  out.solver = solver;
  out.times = std::move(traj.times);
  out.errors = std::move(*traj.error_to_ref);
  out.residuals = std::move(traj.residuals);
  out.final_estimate = flow->estimate(traj.final_state);
  out.settle_time = traj.settle_time;
  out.steps = traj.steps_taken;
  out.wall_clock_ns = traj.wall_clock_ns;
  out.final_error = traj.final_error;
  out.diverged = traj.diverged;
  return out;
}

ConstantsReport report_constants(const SparseProblem& problem, std::size_t s, const ExperimentConfig& config,
                                 unsigned jobs) {
  DeltaMode mode = config.delta_mode;
  mode.jobs = jobs;
  const RipModuli moduli = estimate_moduli(problem.phi(), s, mode);
  const bool exact = moduli.source == DeltaSource::exact_bruteforce;
  const std::string dtag = exact ? "[exact]" : "[sampled lower bound]";

  ConstantsReport rep;
  rep.certified = exact;
  std::string& t = rep.text;
  auto field = [&](std::string k, std::string v) { rep.fields.emplace_back(std::move(k), std::move(v)); };

  t += fmt::format("instance: m = {}, n = {}, s = {} (RIP order 2s = {})\n", problem.m(), problem.n(), s, 2 * s);
  t += fmt::format("status: {}\n", exact ? "CERTIFIED (delta_2s enumerated exactly)"
                                         : "NOT CERTIFIED (delta_2s is a sampled lower bound; every quantity "
                                           "derived from it is optimistic)");
  t += fmt::format("delta_2s = {} {}\n", num(moduli.delta_2s), dtag);
  t += fmt::format("||Phi||_2 = {} [power iteration]\n", num(moduli.phi_norm));
  t += fmt::format("mu = 1 - delta_2s = {} [derived]\n", num(moduli.mu));
  t += fmt::format("L = ||Phi||_2 sqrt(1 + delta_2s) = {} [derived]\n", num(moduli.lipschitz));
  field("certified", exact ? "true" : "false");
  field("delta_2s", num(moduli.delta_2s));
  field("delta_source", std::string(to_string(moduli.source)));
  field("phi_norm", num(moduli.phi_norm));
  field("eta_max", num(moduli.eta_max));

  const auto& p = config.cappa;
  if (!(moduli.eta_max > 0.0)) {
    t += fmt::format("admissible eta: none (delta_2s >= 1 gives eta_max = {} <= 0)\n", num(moduli.eta_max));
    t += "settle_bound: unavailable (no admissible prox step)\n";
    field("settle_bound", "unavailable");
    return rep;
  }
  t += fmt::format("admissible eta: (0, {}) [derived]\n", num(moduli.eta_max));
  if (!(p.eta > 0.0 && p.eta < moduli.eta_max)) {
    t += fmt::format("configured eta = {}: OUTSIDE the admissible interval (try eta = {})\n", num(p.eta),
                     num(0.5 * moduli.eta_max));
    t += "settle_bound: unavailable (configured eta not admissible)\n";
    field("settle_bound", "unavailable");
    return rep;
  }
  const TheoryConstants tc = constants_from_moduli(moduli, p);
  rep.constants = tc;
  t += fmt::format("configured eta = {} [configured]\n", num(p.eta));
  t += fmt::format("c_bar = {} [derived]\n", num(tc.c_bar));
  t += fmt::format("c = {} [derived]\n", num(tc.c));
  t += fmt::format("epsilon(c) = {} [derived]\n", num(tc.epsilon_c));
  const bool in_window = p.alpha1 > tc.alpha1_lower() && p.alpha1 < 1.0;
  t += fmt::format("alpha1 window: ({}, 1); configured alpha1 = {}: {}\n", num(tc.alpha1_lower()), num(p.alpha1),
                   in_window ? "inside" : "OUTSIDE");
  t += fmt::format("alpha2 = {} ({})\n", num(p.alpha2), p.alpha2 > 1.0 ? "> 1, as required" : "NOT > 1");
  t += fmt::format("gamma1 = {}, gamma2 = {} [derived]\n", num(tc.gamma1), num(tc.gamma2));
  t += fmt::format("s1 = {}, s2 = {} [derived]\n", num(tc.s1), num(tc.s2));
  t += fmt::format("a1 = {}, a2 = {} [derived]\n", num(tc.a1), num(tc.a2));
  field("c", num(tc.c));
  field("epsilon_c", num(tc.epsilon_c));
  field("alpha1_in_window", in_window ? "true" : "false");
  if (tc.settle_bound) {
    t += fmt::format("settle_bound = {} {}\n", num(*tc.settle_bound),
                     exact ? "[certified]" : "[from sampled delta; NOT certified]");
    field("settle_bound", num(*tc.settle_bound));
    if (config.budget) {
      rep.gain_scale = gain_scale_for_budget(*tc.settle_bound, *config.budget);
      t += fmt::format("budget T = {}: scale gains by beta = {} -> kappa1 = {}, kappa2 = {}\n", num(*config.budget),
                       num(*rep.gain_scale), num(*rep.gain_scale * p.kappa1), num(*rep.gain_scale * p.kappa2));
      field("gain_scale", num(*rep.gain_scale));
    }
  } else {
    const std::string reason = tc.s1 <= 0.0 ? "s1 <= 0: alpha1 outside (1 - epsilon(c), 1)" : "s2 <= 0";
    t += "settle_bound: unavailable (" + reason + ")\n";
    field("settle_bound", "unavailable");
    if (config.budget) t += "budget: no gain scale without a settling bound\n";
  }
  return rep;
}

ExperimentResult run_error_decay(const ExperimentConfig& config, const ExperimentContext& ctx) {
  config.validate();
  const PreparedInstance inst = prepare_instance(load_or_generate(config), config);
  const SparseProblem& problem = inst.bundle.problem;
  const Vector& x_ref = inst.reference.x_ref;
  const ConstantsReport constants = report_constants(problem, inst.s, config, ctx.jobs);

  ExperimentResult result;
  result.manifest = make_manifest("error_decay", config, constants);
  struct Job {
    Solver solver;
    std::size_t init;
  };
  std::vector<Job> jobs;
  for (Solver s : config.solvers)
    for (std::size_t i = 0; i < config.init_conditions.size(); ++i) {
      jobs.push_back({s, i});
      result.manifest.runs.push_back({fmt::format("{}/init={}", to_string(s), i), config.init_conditions[i].direction_seed});
    }

  std::vector<Vector> starts;
  for (const auto& ic : config.init_conditions)
    starts.push_back(initial_state(problem, x_ref, config.init_direction, ic, inst.s));

  std::vector<SolverRun> runs(jobs.size());
  parallel_for(jobs.size(), ctx.jobs, [&](std::size_t j) {
    runs[j] = run_solver(jobs[j].solver, problem, starts[jobs[j].init], x_ref, inst.settle_tol, config, config.integrator);
  });

  CsvTable series({"solver", "init_norm", "t", "error", "residual", "lyapunov", "diverged"});
  CsvTable summary({"solver", "direction_seed", "norm_scale", "init_norm", "settle_tol", "settle_time", "final_error",
                    "steps", "diverged"});
  add_header(series, result.manifest, constants);
  add_header(summary, result.manifest, constants);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& r = runs[j];
    const auto& ic = config.init_conditions[jobs[j].init];
    const double init_norm = (starts[jobs[j].init] - x_ref).norm();
    for (std::size_t k = 0; k < r.times.size(); ++k)
      series.add_row({std::string(to_string(r.solver)), init_norm, r.times[k], r.errors[k], r.residuals[k],
                      0.5 * r.errors[k] * r.errors[k], r.diverged});
    summary.add_row({std::string(to_string(r.solver)), ic.direction_seed, ic.norm_scale, init_norm, inst.settle_tol,
                     opt_cell(r.settle_time), r.final_error, r.steps, r.diverged});
    result.manifest.runs[j].wall_clock_ns = r.wall_clock_ns;
    result.manifest.runs[j].diverged = r.diverged;
    if (r.diverged) ++result.diverged_runs;
    result.summary.push_back(fmt::format("{:>7} init_norm={:<12.6g} settle_time={:<12} final_error={:.6g}{}",
                                         to_string(r.solver), init_norm,
                                         r.settle_time ? fmt::format("{:.6g}", *r.settle_time) : "none", r.final_error,
                                         r.diverged ? " DIVERGED" : ""));
  }

  Outputs out(config, result);
  out.csv("error_decay.csv", series);
  out.csv("error_decay_summary.csv", summary);
  for (Solver s : config.solvers) {
    std::vector<Series> lines;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].solver != s) continue;
      const double init_norm = (starts[jobs[j].init] - x_ref).norm();
      lines.push_back(make_series(fmt::format("|x0-x*| = {:.3g}", init_norm), runs[j].times, runs[j].errors));
    }
    out.svg(fmt::format("error_decay_{}.svg", to_string(s)),
            plot(ctx, fmt::format("{}: error to reference", to_string(s)), "t", "||x(t) - x_ref||", true), lines);
  }
  out.manifest();
  return result;
}

ExperimentResult run_signal_recovery(const ExperimentConfig& config, const ExperimentContext& ctx) {
  config.validate();
  const PreparedInstance inst = prepare_instance(load_or_generate(config), config);
  if (!inst.bundle.truth) throw InvalidConfiguration("signal recovery needs an instance with ground truth");
  const SparseProblem& problem = inst.bundle.problem;
  const Vector& x_ref = inst.reference.x_ref;
  const Vector& x_true = inst.bundle.truth->x_true;
  const ConstantsReport constants = report_constants(problem, inst.s, config, ctx.jobs);

  ExperimentResult result;
  result.manifest = make_manifest("signal_recovery", config, constants);
  const InitCondition& ic = config.init_conditions.front();
  result.manifest.runs.push_back({"cappa/init=0", ic.direction_seed});

  const Vector x0 = initial_state(problem, x_ref, config.init_direction, ic, inst.s);
  IntegratorConfig integ = config.integrator;
  integ.record_stride = std::numeric_limits<std::size_t>::max();
  const SolverRun run = run_solver(Solver::cappa, problem, x0, x_ref, inst.settle_tol, config, integ);
  const Vector& x_cappa = run.final_estimate;
  const Vector z_cappa = prox_step(problem, x_cappa, config.cappa.eta).z;
  result.manifest.runs[0].wall_clock_ns = run.wall_clock_ns;
  result.manifest.runs[0].diverged = run.diverged;
  result.diverged_runs = run.diverged ? 1 : 0;

  CsvTable values({"index", "x_cappa", "z_cappa", "x_ref", "x_true"});
  add_header(values, result.manifest, constants);
  for (Index i = 0; i < problem.n(); ++i)
    values.add_row({static_cast<std::uint64_t>(i), x_cappa(i), z_cappa(i), x_ref(i), x_true(i)});

  const double tol = config.zero_tol;
  auto support = [&](const Vector& x) {
    std::vector<bool> s(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i) s[static_cast<std::size_t>(i)] = std::abs(x(i)) > tol;
    return s;
  };
  const bool match_state = support(x_cappa) == support(x_ref);
  const bool match_prox = support(z_cappa) == support(x_ref);
  const bool match_truth = support(x_ref) == support(x_true);
  const double max_diff = (x_cappa - x_ref).lpNorm<Eigen::Infinity>();

  CsvTable summary({"quantity", "value"});
  add_header(summary, result.manifest, constants);
  summary.add_row({std::string("zero_tol"), tol});
  summary.add_row({std::string("t_final"), run.times.back()});
  summary.add_row({std::string("support_size_cappa"), static_cast<std::uint64_t>(support_size(x_cappa, tol))});
  summary.add_row({std::string("support_size_cappa_prox"), static_cast<std::uint64_t>(support_size(z_cappa, tol))});
  summary.add_row({std::string("support_size_ref"), static_cast<std::uint64_t>(support_size(x_ref, tol))});
  summary.add_row({std::string("support_size_true"), static_cast<std::uint64_t>(support_size(x_true, tol))});
  summary.add_row({std::string("support_match_cappa_ref"), match_state});
  summary.add_row({std::string("support_match_cappa_prox_ref"), match_prox});
  summary.add_row({std::string("support_match_ref_true"), match_truth});
  summary.add_row({std::string("max_abs_diff_cappa_ref"), max_diff});
  summary.add_row({std::string("final_error"), run.final_error});
  summary.add_row({std::string("diverged"), run.diverged});

  result.summary.push_back(fmt::format("support sizes at zero_tol={:g}: cappa {}, prox(cappa) {}, x_ref {}, x_true {}", tol,
                                       support_size(x_cappa, tol), support_size(z_cappa, tol),
                                       support_size(x_ref, tol), support_size(x_true, tol)));
  result.summary.push_back(fmt::format("max |x_cappa - x_ref| = {:.6g}, final error = {:.6g}", max_diff, run.final_error));

  Outputs out(config, result);
  out.csv("recovery.csv", values);
  out.csv("recovery_summary.csv", summary);
  std::vector<double> idx(static_cast<std::size_t>(problem.n()));
  std::iota(idx.begin(), idx.end(), 0.0);
  auto as_vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  out.svg("recovery.svg", plot(ctx, "terminal CAPPA state, x_ref and x_true", "index", "value"),
          {make_series("x_cappa", idx, as_vec(x_cappa), SeriesStyle::stem),
           make_series("x_ref", idx, as_vec(x_ref), SeriesStyle::points),
           make_series("x_true", idx, as_vec(x_true), SeriesStyle::points)});
  out.manifest();
  return result;
}

namespace {

struct TrialOutcome {
  std::uint64_t trial;
  std::uint64_t seed;
  Solver solver;
  bool converged;
  std::optional<double> settle_time;
  std::uint64_t steps;
  double final_error;
  std::uint64_t wall_clock_ns;
  bool diverged;
};

// The trial protocol on instances drawn from `spec` (or the loaded bundle).
std::vector<TrialOutcome> run_trials(const ExperimentConfig& config, const InstanceSpec& spec,
                                     const std::optional<ProblemBundle>& fixed, unsigned jobs) {
  const std::size_t n_solvers = config.solvers.size();
  std::vector<TrialOutcome> out(config.trials * n_solvers);
  IntegratorConfig integ = config.integrator;
  integ.stop_on_settle = true;
  integ.record_stride = std::numeric_limits<std::size_t>::max();
  const InitCondition& base = config.init_conditions.front();

  parallel_for(config.trials, jobs, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(config.master_seed, k);
    ProblemBundle bundle = fixed ? *fixed : [&] {
      InstanceSpec trial_spec = spec;
      trial_spec.seed = seed;
      return generate_instance(trial_spec);
    }();
    const PreparedInstance inst = prepare_instance(std::move(bundle), config);
    const Vector x0 = initial_state(inst.bundle.problem, inst.reference.x_ref, config.init_direction,
                                    InitCondition{derive_seed(seed, 1), base.norm_scale}, inst.s);
    for (std::size_t j = 0; j < n_solvers; ++j) {
      const SolverRun r =
          run_solver(config.solvers[j], inst.bundle.problem, x0, inst.reference.x_ref, inst.settle_tol, config, integ);
      out[k * n_solvers + j] = TrialOutcome{k,        seed,           config.solvers[j], r.settle_time.has_value(),
                                            r.settle_time, r.steps, r.final_error, r.wall_clock_ns, r.diverged};
    }
  });
  return out;
}

struct WallStats {
  double min = 0, mean = 0, max = 0;
  std::size_t converged = 0, total = 0;
};

// Order statistics over converged trials only; non-converged ones are counted.
WallStats wall_stats(const std::vector<TrialOutcome>& outcomes, Solver solver) {
  WallStats s;
  double sum = 0;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  for (const auto& o : outcomes) {
    if (o.solver != solver) continue;
    ++s.total;
    if (!o.converged) continue;
    ++s.converged;
    const double w = static_cast<double>(o.wall_clock_ns) * 1e-9;
    sum += w;
    s.min = std::min(s.min, w);
    s.max = std::max(s.max, w);
  }
  if (s.converged == 0) {
    s.min = s.mean = s.max = std::numeric_limits<double>::quiet_NaN();
  } else {
    s.mean = sum / static_cast<double>(s.converged);
  }
  return s;
}

std::vector<Cell> outcome_row(const TrialOutcome& o) {
  return {o.trial, o.seed, std::string(to_string(o.solver)), o.converged, opt_cell(o.settle_time), o.steps,
          o.final_error, o.diverged};
}

const std::vector<std::string> kOutcomeColumns{"trial", "seed", "solver", "converged", "settle_time", "steps",
                                               "final_error", "diverged"};

}  // namespace

ExperimentResult run_wallclock_trials(const ExperimentConfig& config, const ExperimentContext& ctx) {
  config.validate();
  if (config.trials < 2) throw InvalidConfiguration("bench-trials needs trials >= 2");
  std::optional<ProblemBundle> fixed;
  if (config.instance_path) fixed = load_bundle(*config.instance_path);
  const ProblemBundle base = fixed ? *fixed : generate_instance(config.instance);
  const ConstantsReport constants = report_constants(base.problem, sparsity_of(base, config), config, ctx.jobs);

  ExperimentResult result;
  result.manifest = make_manifest("bench_trials", config, constants);
  for (std::size_t k = 0; k < config.trials; ++k)
    for (Solver s : config.solvers)
      result.manifest.runs.push_back({fmt::format("trial={}/{}", k, to_string(s)), derive_seed(config.master_seed, k)});

  const auto outcomes = run_trials(config, config.instance, fixed, ctx.jobs);

  std::vector<std::string> cols = kOutcomeColumns;
  CsvTable per_trial(cols);
  CsvTable timing({"trial", "seed", "solver", "converged", "wall_clock_s"});
  CsvTable stats({"solver", "statistic", "wall_clock_s", "converged_trials", "trials"});
  add_header(per_trial, result.manifest, constants);
  add_header(timing, result.manifest, constants);
  add_header(stats, result.manifest, constants);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    per_trial.add_row(outcome_row(o));
    timing.add_row({o.trial, o.seed, std::string(to_string(o.solver)), o.converged,
                    static_cast<double>(o.wall_clock_ns) * 1e-9});
    result.manifest.runs[i].wall_clock_ns = o.wall_clock_ns;
    result.manifest.runs[i].diverged = o.diverged;
    if (o.diverged) ++result.diverged_runs;
  }

  std::vector<Series> bars;
  for (Solver s : config.solvers) {
    const WallStats w = wall_stats(outcomes, s);
    for (auto [name, v] : {std::pair{"min", w.min}, std::pair{"mean", w.mean}, std::pair{"max", w.max}})
      stats.add_row({std::string(to_string(s)), std::string(name), v, static_cast<std::uint64_t>(w.converged),
                     static_cast<std::uint64_t>(w.total)});
    result.summary.push_back(fmt::format("{:>7} converged {}/{}  wall-clock min/mean/max = {:.4g} / {:.4g} / {:.4g} s",
                                         to_string(s), w.converged, w.total, w.min, w.mean, w.max));
    std::vector<double> xs, ys;
    for (const auto& o : outcomes)
      if (o.solver == s && o.converged) {
        xs.push_back(static_cast<double>(o.trial));
        ys.push_back(static_cast<double>(o.wall_clock_ns) * 1e-9);
      }
    bars.push_back(make_series(std::string(to_string(s)), xs, ys, SeriesStyle::points));
  }

  Outputs out(config, result);
  out.csv("bench_trials.csv", per_trial);
  out.csv("bench_trials_timing.csv", timing);
  out.csv("bench_trials_timing_summary.csv", stats);
  out.svg("bench_trials.svg", plot(ctx, "wall-clock time to the shared threshold", "trial", "seconds", true), bars);
  out.manifest();
  return result;
}

ExperimentResult run_size_sweep(const ExperimentConfig& config, const ExperimentContext& ctx) {
  config.validate();
  if (config.instance_path) throw InvalidConfiguration("bench-size generates its instances; drop instance.path");
  const ProblemBundle base = generate_instance(config.instance);
  const ConstantsReport constants = report_constants(base.problem, config.instance.s, config, ctx.jobs);

  ExperimentResult result;
  result.manifest = make_manifest("bench_size", config, constants);
  std::vector<InstanceSpec> specs;
  for (const auto& p : config.nm_sweep) {
    InstanceSpec spec = config.instance;
    spec.n = p.n;
    spec.m = p.m;
    const double scaled = static_cast<double>(config.instance.s) * static_cast<double>(p.n) /
                          static_cast<double>(config.instance.n);
    spec.s = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(scaled)), 1, p.m);
    specs.push_back(spec);
    for (std::size_t k = 0; k < config.trials; ++k)
      for (Solver s : config.solvers)
        result.manifest.runs.push_back(
            {fmt::format("n={}/trial={}/{}", p.n, k, to_string(s)), derive_seed(config.master_seed, k)});
  }

  std::vector<std::string> cols{"n", "m", "s"};
  cols.insert(cols.end(), kOutcomeColumns.begin(), kOutcomeColumns.end());
  CsvTable per_trial(cols);
  CsvTable timing({"n", "m", "s", "solver", "min_wall_clock_s", "mean_wall_clock_s", "max_wall_clock_s",
                   "converged_trials", "trials"});
  add_header(per_trial, result.manifest, constants);
  add_header(timing, result.manifest, constants);

  std::map<Solver, Series> curves;
  std::size_t run_index = 0;
  for (const auto& spec : specs) {
    const auto outcomes = run_trials(config, spec, std::nullopt, ctx.jobs);
    for (const auto& o : outcomes) {
      std::vector<Cell> row{static_cast<std::uint64_t>(spec.n), static_cast<std::uint64_t>(spec.m),
                            static_cast<std::uint64_t>(spec.s)};
      auto rest = outcome_row(o);
      row.insert(row.end(), rest.begin(), rest.end());
      per_trial.add_row(std::move(row));
      result.manifest.runs[run_index].wall_clock_ns = o.wall_clock_ns;
      result.manifest.runs[run_index].diverged = o.diverged;
      if (o.diverged) ++result.diverged_runs;
      ++run_index;
    }
    for (Solver s : config.solvers) {
      const WallStats w = wall_stats(outcomes, s);
      timing.add_row({static_cast<std::uint64_t>(spec.n), static_cast<std::uint64_t>(spec.m),
                      static_cast<std::uint64_t>(spec.s), std::string(to_string(s)), w.min, w.mean, w.max,
                      static_cast<std::uint64_t>(w.converged), static_cast<std::uint64_t>(w.total)});
      result.summary.push_back(fmt::format("n={:<5} m={:<5} s={:<4} {:>7} converged {}/{}  mean wall-clock {:.4g} s",
                                           spec.n, spec.m, spec.s, to_string(s), w.converged, w.total, w.mean));
      auto& c = curves[s];
      c.label = std::string(to_string(s));
      c.style = SeriesStyle::points;
      c.x.push_back(static_cast<double>(spec.n));
      c.y.push_back(w.mean);
      c.y_low.push_back(w.min);
      c.y_high.push_back(w.max);
    }
  }

  Outputs out(config, result);
  out.csv("bench_size.csv", per_trial);
  out.csv("bench_size_timing.csv", timing);
  std::vector<Series> series;
  for (Solver s : config.solvers) series.push_back(curves[s]);
  out.svg("bench_size.svg", plot(ctx, "mean wall-clock vs n (min/max bars)", "n", "seconds", true), series);
  out.manifest();
  return result;
}

ExperimentResult run_dt_sweep(const ExperimentConfig& config, const ExperimentContext& ctx) {
  config.validate();
  const PreparedInstance inst = prepare_instance(load_or_generate(config), config);
  const SparseProblem& problem = inst.bundle.problem;
  const Vector& x_ref = inst.reference.x_ref;
  const ConstantsReport constants = report_constants(problem, inst.s, config, ctx.jobs);

  ExperimentResult result;
  result.manifest = make_manifest("dt_sweep", config, constants);
  const InitCondition& ic = config.init_conditions.front();
  for (double dt : config.dt_sweep) result.manifest.runs.push_back({fmt::format("cappa/dt={}", num(dt)), ic.direction_seed});
  const Vector x0 = initial_state(problem, x_ref, config.init_direction, ic, inst.s);

  // Long runs are thinned to about 2000 recorded points per series.
  std::vector<IntegratorConfig> integ(config.dt_sweep.size(), config.integrator);
  for (std::size_t i = 0; i < integ.size(); ++i) {
    integ[i].dt = config.dt_sweep[i];
    integ[i].record_stride = std::max<std::size_t>(config.integrator.record_stride, integ[i].step_count() / 2000);
  }
  std::vector<SolverRun> runs(config.dt_sweep.size());
  parallel_for(runs.size(), ctx.jobs, [&](std::size_t i) {
    runs[i] = run_solver(Solver::cappa, problem, x0, x_ref, inst.settle_tol, config, integ[i]);
  });

  CsvTable series({"dt", "t", "error", "residual", "lyapunov"});
  CsvTable summary({"dt", "steps", "final_error", "settle_time", "degenerate", "diverged"});
  add_header(series, result.manifest, constants);
  add_header(summary, result.manifest, constants);
  std::vector<Series> lines;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const double dt = config.dt_sweep[i];
    for (std::size_t k = 0; k < r.times.size(); ++k)
      series.add_row({dt, r.times[k], r.errors[k], r.residuals[k], 0.5 * r.errors[k] * r.errors[k]});
    const bool degenerate = integ[i].step_count() <= 1;
    summary.add_row({dt, r.steps, r.final_error, opt_cell(r.settle_time), degenerate, r.diverged});
    result.manifest.runs[i].wall_clock_ns = r.wall_clock_ns;
    result.manifest.runs[i].diverged = r.diverged;
    if (r.diverged) ++result.diverged_runs;
    result.summary.push_back(fmt::format("dt={:<8g} steps={:<9} final_error={:.6g}{}{}", dt, r.steps, r.final_error,
                                         degenerate ? " DEGENERATE(single step)" : "", r.diverged ? " DIVERGED" : ""));
    lines.push_back(make_series(fmt::format("dt = {:g}", dt), r.times, r.errors));
  }

  Outputs out(config, result);
  out.csv("dt_sweep.csv", series);
  out.csv("dt_sweep_summary.csv", summary);
  out.svg("dt_sweep.svg", plot(ctx, "CAPPA error for several dt", "t", "||x(t) - x_ref||", true), lines);
  out.manifest();
  return result;
}

ExperimentResult run_constants(const ExperimentConfig& config, const ExperimentContext& ctx) {
  config.validate();
  const ProblemBundle bundle = load_or_generate(config);
  const ConstantsReport constants = report_constants(bundle.problem, sparsity_of(bundle, config), config, ctx.jobs);
  ExperimentResult result;
  result.manifest = make_manifest("constants", config, constants);
  Outputs out(config, result);
  const auto path = config.output_dir / "constants.txt";
  write_text_file(path, constants.text);
  result.files.push_back(path);
  std::string line;
  for (char ch : constants.text) {
    if (ch == '\n') {
      result.summary.push_back(line);
      line.clear();
    } else {
      line += ch;
    }
  }
  out.manifest();
  return result;
}

ExperimentResult run_generate(const ExperimentConfig& config, const ExperimentContext&) {
  config.validate();
  if (config.instance_path) throw InvalidConfiguration("generate writes a new instance; drop instance.path");
  const ProblemBundle bundle = generate_instance(config.instance);
  ExperimentResult result;
  result.manifest = make_manifest("generate", config, ConstantsReport{});
  result.manifest.runs.push_back({"instance", config.instance.seed});
  const auto path = config.output_dir / "instance.bin";
  std::filesystem::create_directories(config.output_dir);
  save_bundle(bundle, path);
  result.files.push_back(path);
  result.summary.push_back(fmt::format("wrote {} (m = {}, n = {}, s = {}, seed = {})", path.string(), bundle.problem.m(),
                                       bundle.problem.n(), config.instance.s, config.instance.seed));
  Outputs(config, result).manifest();
  return result;
}

ExperimentResult run_solve(const ExperimentConfig& config, const ExperimentContext&) {
  config.validate();
  const ProblemBundle bundle = load_or_generate(config);
  const auto start = Clock::now();
  const ReferenceSolution ref = fista_solve(bundle.problem, config.reference_tol, config.reference_max_iter);
  ExperimentResult result;
  result.manifest = make_manifest("solve", config, ConstantsReport{});
  result.manifest.runs.push_back({"fista", config.instance.seed, elapsed_ns(start), false});

  CsvTable table({"index", "x_ref"});
  add_header(table, result.manifest, ConstantsReport{});
  table.add_meta("kkt_residual", num(ref.kkt_residual));
  table.add_meta("objective", num(ref.objective));
  table.add_meta("iterations", std::to_string(ref.iterations));
  table.add_meta("converged", ref.converged ? "true" : "false");
  for (Index i = 0; i < ref.x_ref.size(); ++i) table.add_row({static_cast<std::uint64_t>(i), ref.x_ref(i)});
  Outputs out(config, result);
  out.csv("solve.csv", table);
  out.manifest();
  result.summary.push_back(fmt::format("FISTA: {} iterations, kkt residual {:.3e}, objective {:.12g}, support {} ({})",
                                       ref.iterations, ref.kkt_residual, ref.objective,
                                       support_size(ref.x_ref, config.zero_tol),
                                       ref.converged ? "converged" : "NOT converged"));
  return result;
}

}  // namespace cappa::harness

// Command-line front end for the experiment harness.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid configuration or
// input, 3 at least one run diverged, 4 constants not certified while
// --require-certified was given.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cappa/error.hpp"
#include "cappa/harness/config.hpp"
#include "cappa/harness/experiments.hpp"

namespace {

using namespace cappa;
using namespace cappa::harness;

enum ExitCode { kOk = 0, kFailure = 1, kBadInput = 2, kDiverged = 3, kNotCertified = 4 };

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> instance;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  unsigned jobs = 1;
  bool deterministic = true;
  // constants only
  bool require_certified = false;
  std::optional<double> budget;
};

ExperimentConfig resolve(const CommonOptions& opt) {
  ExperimentConfig config = opt.config ? load_config(*opt.config) : ExperimentConfig{};
  if (opt.instance) config.instance_path = *opt.instance;
  if (opt.seed) {
    config.instance.seed = *opt.seed;
    config.master_seed = *opt.seed;
  }
  if (opt.out) config.output_dir = *opt.out;
  if (opt.budget) config.budget = *opt.budget;
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("-c,--config", opt.config, "INI config, or a run manifest (*.json) to replay")
      ->check(CLI::ExistingFile);
  cmd->add_option("-i,--instance", opt.instance, "load a saved instance bundle instead of generating one")
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", opt.seed, "override the instance seed and the trial master seed");
  cmd->add_option("-o,--out", opt.out, "output directory");
  cmd->add_option("-j,--jobs", opt.jobs, "worker threads")->check(CLI::Range(1u, 1024u));
  cmd->add_flag("--deterministic,!--timestamped", opt.deterministic,
                "byte-reproducible output (default); --timestamped stamps the SVGs");
}

int report(const ExperimentResult& result) {
  for (const auto& line : result.summary) fmt::print("{}\n", line);
  for (const auto& f : result.files) fmt::print("wrote {}\n", f.string());
  fmt::print("manifest sha256 {}\n", result.manifest.hash());
  if (result.diverged_runs > 0) {
    fmt::print(stderr, "error: {} run(s) diverged; see the manifest for which\n", result.diverged_runs);
    return kDiverged;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-time proximal flows for sparse recovery: instance generation, reference solves, "
               "experiments and theory constants"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(library_version()));

  CommonOptions opt;
  using Runner = std::function<ExperimentResult(const ExperimentConfig&, const ExperimentContext&)>;
  std::optional<Runner> runner;
  bool constants_cmd = false;

  auto sub = [&](const char* name, const char* help, Runner fn) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, opt);
    cmd->callback([&runner, fn] { runner = fn; });
    return cmd;
  };
  sub("generate", "draw an instance and save it as instance.bin", run_generate);
  sub("solve", "FISTA reference solution of an instance", run_solve);
  sub("fig-error-decay", "error to x_ref over time for every solver and initial condition", run_error_decay);
  sub("fig-recovery", "terminal CAPPA estimate against x_ref and x_true", run_signal_recovery);
  sub("bench-trials", "wall-clock time to the shared threshold over repeated trials", run_wallclock_trials);
  sub("bench-size", "the trial benchmark across problem sizes", run_size_sweep);
  sub("bench-dt", "CAPPA error series for several integration steps", run_dt_sweep);
  CLI::App* constants = sub("constants", "RIP constant, contraction constants and the settling bound", run_constants);
  constants->add_flag("--require-certified", opt.require_certified,
                      "exit with status 4 unless delta_2s was enumerated exactly");
  constants->add_option("--budget", opt.budget, "settling-time budget; reports the gain scale that meets it")
      ->check(CLI::PositiveNumber);
  constants->callback([&] {
    runner = Runner(run_constants);
    constants_cmd = true;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    const ExperimentConfig config = resolve(opt);
    const ExperimentContext ctx{opt.jobs, opt.deterministic};
    const ExperimentResult result = (*runner)(config, ctx);
    const int code = report(result);
    if (code != kOk) return code;
    if (constants_cmd && opt.require_certified && result.manifest.constants.find("status: CERTIFIED") == std::string::npos) {
      fmt::print(stderr, "error: delta_2s is not certified for this instance\n");
      return kNotCertified;
    }
    return kOk;
  } catch (const InvalidConfiguration& e) {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return kBadInput;
  } catch (const InvalidArgument& e) {
    fmt::print(stderr, "invalid input: {}\n", e.what());
    return kBadInput;
  } catch (const ParseError& e) {
    fmt::print(stderr, "unreadable input: {}\n", e.what());
    return kBadInput;
  } catch (const IntegrityError& e) {
    fmt::print(stderr, "corrupt input: {}\n", e.what());
    return kBadInput;
  } catch (const CapacityError& e) {
    fmt::print(stderr, "too large: {}\n", e.what());
    return kBadInput;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kFailure;
  }
}

#include "cappa/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cappa/error.hpp"

namespace cappa::harness {

namespace pt = boost::property_tree;

std::string_view to_string(Solver s) {
  switch (s) {
    case Solver::cappa: return "cappa";
    case Solver::pds: return "pds";
    case Solver::lca: return "lca";
    case Solver::ft_lca: return "ft_lca";
    case Solver::fista: return "fista";
  }
  return "?";
}

Solver parse_solver(std::string_view name) {
  for (Solver s : {Solver::cappa, Solver::pds, Solver::lca, Solver::ft_lca, Solver::fista})
    if (to_string(s) == name) return s;
  throw InvalidConfiguration("unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(InitDirection d) {
  switch (d) {
    case InitDirection::gaussian: return "gaussian";
    case InitDirection::row_space: return "row_space";
    case InitDirection::sparse: return "sparse";
  }
  return "?";
}

InitDirection parse_init_direction(std::string_view name) {
  for (InitDirection d : {InitDirection::gaussian, InitDirection::row_space, InitDirection::sparse})
    if (to_string(d) == name) return d;
  throw InvalidConfiguration("unknown init_direction '" + std::string(name) + "'");
}

namespace {

std::string_view to_string(DeltaMode::Kind k) {
  switch (k) {
    case DeltaMode::Kind::exact: return "exact";
    case DeltaMode::Kind::surrogate: return "surrogate";
    case DeltaMode::Kind::automatic: return "automatic";
  }
  return "?";
}

std::string_view to_string(GradientOperator::Mode m) { return m == GradientOperator::Mode::gram ? "gram" : "matvec"; }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string key_name(std::string_view section, std::string_view key) {
  return std::string(section) + "." + std::string(key);
}

double to_double(std::string_view text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw InvalidConfiguration(where + ": '" + t + "' is not a number");
  return v;
}

std::uint64_t to_u64(std::string_view text, const std::string& where) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw InvalidConfiguration(where + ": '" + t + "' is not a non-negative integer");
  return v;
}

bool to_bool(std::string_view text, const std::string& where) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw InvalidConfiguration(where + ": '" + t + "' is not a boolean");
}

// Consumes keys of one section, remembering which were read so the rest can
// be reported as unknown.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  std::optional<std::string> get(const std::string& key) {
    if (!tree_) return std::nullopt;
    used_.insert(key);
    if (auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'))) return trim(*v);
    return std::nullopt;
  }

  void read(const std::string& key, double& out) {
    if (auto v = get(key)) out = to_double(*v, key_name(name_, key));
  }
  template <class T>
    requires(std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
  void read(const std::string& key, T& out) {
    if (auto v = get(key)) out = static_cast<T>(to_u64(*v, key_name(name_, key)));
  }
  void read(const std::string& key, bool& out) {
    if (auto v = get(key)) out = to_bool(*v, key_name(name_, key));
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!child.empty()) throw InvalidConfiguration("nested entry '" + key_name(name_, key) + "' is not allowed");
      if (!used_.count(key)) throw InvalidConfiguration("unknown key '" + key_name(name_, key) + "'");
    }
  }

  const std::string& name() const { return name_; }

 private:
  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
};

const std::set<std::string> kSections{"instance", "cappa", "lca", "integrator", "experiment", "reference", "analysis"};

}  // namespace

void ExperimentConfig::validate() const {
  if (!instance_path) {
    if (!(instance.s > 0 && instance.s <= instance.m && instance.m < instance.n))
      throw InvalidConfiguration("instance dimensions must satisfy 0 < s <= m < n");
    if (!(instance.sigma >= 0.0)) throw InvalidConfiguration("instance.sigma must be >= 0");
    if (!(instance.lambda > 0.0)) throw InvalidConfiguration("instance.lambda must be > 0");
  }
  cappa.validate();
  lca.validate();
  integrator.validate();
  if (solvers.empty()) throw InvalidConfiguration("experiment.solvers is empty");
  if (init_conditions.empty()) throw InvalidConfiguration("experiment.init_conditions is empty");
  for (const auto& ic : init_conditions)
    if (!(ic.norm_scale >= 0.0) || !std::isfinite(ic.norm_scale))
      throw InvalidConfiguration("init condition scales must be finite and >= 0");
  if (!(settle_tol_rel > 0.0)) throw InvalidConfiguration("experiment.settle_tol_rel must be > 0");
  if (trials < 1) throw InvalidConfiguration("experiment.trials must be >= 1");
  if (dt_sweep.empty()) throw InvalidConfiguration("experiment.dt_sweep is empty");
  for (double dt : dt_sweep)
    if (!(dt > 0.0) || !(dt <= integrator.t_max))
      throw InvalidConfiguration("experiment.dt_sweep values must lie in (0, integrator.t_max]");
  if (nm_sweep.empty()) throw InvalidConfiguration("experiment.nm_sweep is empty");
  for (const auto& p : nm_sweep) {
    if (!(p.m > 0 && p.m < p.n)) throw InvalidConfiguration(fmt::format("nm_sweep point {}x{} needs 0 < m < n", p.n, p.m));
    if (keep_ratio && p.n * nm_sweep.front().m != p.m * nm_sweep.front().n)
      throw InvalidConfiguration(fmt::format("nm_sweep point {}x{} changes the n/m ratio (keep_ratio = true)", p.n, p.m));
  }
  if (!(reference_tol > 0.0)) throw InvalidConfiguration("reference.tol must be > 0");
  if (reference_max_iter < 1) throw InvalidConfiguration("reference.max_iter must be >= 1");
  if (delta_mode.samples < 1) throw InvalidConfiguration("analysis.rip_samples must be >= 1");
  if (!(zero_tol >= 0.0)) throw InvalidConfiguration("analysis.zero_tol must be >= 0");
  if (budget && !(*budget > 0.0)) throw InvalidConfiguration("analysis.budget must be > 0");
}

ExperimentConfig parse_config(std::string_view text) {
  pt::ptree root;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidConfiguration(std::string("config: ") + e.what());
  }
  for (const auto& [name, child] : root) {
    if (child.empty() && !child.data().empty()) throw InvalidConfiguration("key '" + name + "' outside of a section");
    if (!kSections.count(name)) throw InvalidConfiguration("unknown section [" + name + "]");
  }
  auto section = [&](const std::string& name) {
    return Section(name, root.get_child_optional(pt::ptree::path_type(name, '\0')).get_ptr());
  };

  ExperimentConfig c;
  {
    Section s = section("instance");
    if (auto v = s.get("path"); v && !v->empty()) c.instance_path = *v;
    s.read("n", c.instance.n);
    s.read("m", c.instance.m);
    s.read("s", c.instance.s);
    s.read("sigma", c.instance.sigma);
    s.read("lambda", c.instance.lambda);
    s.read("seed", c.instance.seed);
    if (auto v = s.get("ensemble")) c.instance.ensemble = parse_ensemble(*v);
    s.reject_unknown();
  }
  {
    Section s = section("cappa");
    s.read("kappa1", c.cappa.kappa1);
    s.read("kappa2", c.cappa.kappa2);
    s.read("alpha1", c.cappa.alpha1);
    s.read("alpha2", c.cappa.alpha2);
    s.read("eta", c.cappa.eta);
    s.reject_unknown();
  }
  {
    Section s = section("lca");
    s.read("tau", c.lca.tau);
    s.read("threshold", c.lca.threshold);
    s.read("ft_exponent", c.lca.ft_exponent);
    s.reject_unknown();
  }
  {
    Section s = section("integrator");
    s.read("dt", c.integrator.dt);
    s.read("t_max", c.integrator.t_max);
    s.read("stop_residual", c.integrator.stop_residual);
    s.read("record_stride", c.integrator.record_stride);
    if (auto v = s.get("scheme")) c.integrator.scheme = parse_scheme(*v);
    if (auto v = s.get("gradient")) {
      if (*v == "gram") {
        c.gradient_mode = GradientOperator::Mode::gram;
      } else if (*v == "matvec") {
        c.gradient_mode = GradientOperator::Mode::matvec;
      } else {
        throw InvalidConfiguration("integrator.gradient must be gram or matvec");
      }
    }
    s.reject_unknown();
  }
  {
    Section s = section("experiment");
    if (auto v = s.get("solvers")) {
      c.solvers.clear();
      for (const auto& name : split(*v, ',')) c.solvers.push_back(parse_solver(name));
    }
    if (auto v = s.get("init_conditions")) {
      c.init_conditions.clear();
      for (const auto& item : split(*v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw InvalidConfiguration("experiment.init_conditions: expected seed:scale, got '" + item + "'");
        c.init_conditions.push_back({to_u64(parts[0], "experiment.init_conditions"),
                                     to_double(parts[1], "experiment.init_conditions")});
      }
    }
    if (auto v = s.get("init_direction")) c.init_direction = parse_init_direction(*v);
    s.read("settle_tol_rel", c.settle_tol_rel);
    s.read("trials", c.trials);
    if (auto v = s.get("dt_sweep")) {
      c.dt_sweep.clear();
      for (const auto& item : split(*v, ',')) c.dt_sweep.push_back(to_double(item, "experiment.dt_sweep"));
    }
    if (auto v = s.get("nm_sweep")) {
      c.nm_sweep.clear();
      for (const auto& item : split(*v, ',')) {
        const auto parts = split(item, 'x');
        if (parts.size() != 2) throw InvalidConfiguration("experiment.nm_sweep: expected NxM, got '" + item + "'");
        c.nm_sweep.push_back({static_cast<std::size_t>(to_u64(parts[0], "experiment.nm_sweep")),
                              static_cast<std::size_t>(to_u64(parts[1], "experiment.nm_sweep"))});
      }
    }
    s.read("keep_ratio", c.keep_ratio);
    s.read("master_seed", c.master_seed);
    if (auto v = s.get("output_dir")) c.output_dir = *v;
    s.read("svg", c.svg);
    s.reject_unknown();
  }
  {
    Section s = section("reference");
    s.read("tol", c.reference_tol);
    s.read("max_iter", c.reference_max_iter);
    s.reject_unknown();
  }
  {
    Section s = section("analysis");
    if (auto v = s.get("delta_mode")) {
      if (*v == "exact") {
        c.delta_mode.kind = DeltaMode::Kind::exact;
      } else if (*v == "surrogate") {
        c.delta_mode.kind = DeltaMode::Kind::surrogate;
      } else if (*v == "automatic") {
        c.delta_mode.kind = DeltaMode::Kind::automatic;
      } else {
        throw InvalidConfiguration("analysis.delta_mode must be exact, surrogate or automatic");
      }
    }
    s.read("rip_samples", c.delta_mode.samples);
    s.read("rip_seed", c.delta_mode.seed);
    s.read("zero_tol", c.zero_tol);
    if (auto v = s.get("budget"); v && !v->empty()) c.budget = to_double(*v, "analysis.budget");
    s.reject_unknown();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfiguration("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfiguration("manifest '" + path.string() + "': " + e.what());
    }
    if (!manifest.contains("config") || !manifest["config"].is_string())
      throw InvalidConfiguration("manifest '" + path.string() + "' has no config snapshot");
    return parse_config(manifest["config"].get<std::string>());
  }
  return parse_config(buf.str());
}

std::string render_config(const ExperimentConfig& c, bool include_output_dir) {
  auto num = [](double v) { return fmt::format("{:.17g}", v); };
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };

  out += "[instance]\n";
  line("path", c.instance_path ? c.instance_path->generic_string() : "");
  line("n", std::to_string(c.instance.n));
  line("m", std::to_string(c.instance.m));
  line("s", std::to_string(c.instance.s));
  line("sigma", num(c.instance.sigma));
  line("lambda", num(c.instance.lambda));
  line("seed", std::to_string(c.instance.seed));
  line("ensemble", std::string(to_string(c.instance.ensemble)));

  out += "\n[cappa]\n";
  line("kappa1", num(c.cappa.kappa1));
  line("kappa2", num(c.cappa.kappa2));
  line("alpha1", num(c.cappa.alpha1));
  line("alpha2", num(c.cappa.alpha2));
  line("eta", num(c.cappa.eta));

  out += "\n[lca]\n";
  line("tau", num(c.lca.tau));
  line("threshold", num(c.lca.threshold));
  line("ft_exponent", num(c.lca.ft_exponent));

  out += "\n[integrator]\n";
  line("dt", num(c.integrator.dt));
  line("t_max", num(c.integrator.t_max));
  line("stop_residual", num(c.integrator.stop_residual));
  line("record_stride", std::to_string(c.integrator.record_stride));
  line("scheme", std::string(to_string(c.integrator.scheme)));
  line("gradient", std::string(to_string(c.gradient_mode)));

  out += "\n[experiment]\n";
  std::vector<std::string> items;
  for (Solver s : c.solvers) items.emplace_back(to_string(s));
  line("solvers", fmt::format("{}", fmt::join(items, ", ")));
  items.clear();
  for (const auto& ic : c.init_conditions) items.push_back(fmt::format("{}:{}", ic.direction_seed, num(ic.norm_scale)));
  line("init_conditions", fmt::format("{}", fmt::join(items, ", ")));
  line("init_direction", std::string(to_string(c.init_direction)));
  line("settle_tol_rel", num(c.settle_tol_rel));
  line("trials", std::to_string(c.trials));
  items.clear();
  for (double dt : c.dt_sweep) items.push_back(num(dt));
  line("dt_sweep", fmt::format("{}", fmt::join(items, ", ")));
  items.clear();
  for (const auto& p : c.nm_sweep) items.push_back(fmt::format("{}x{}", p.n, p.m));
  line("nm_sweep", fmt::format("{}", fmt::join(items, ", ")));
  line("keep_ratio", c.keep_ratio ? "true" : "false");
  line("master_seed", std::to_string(c.master_seed));
  if (include_output_dir) line("output_dir", c.output_dir.generic_string());
  line("svg", c.svg ? "true" : "false");

  out += "\n[reference]\n";
  line("tol", num(c.reference_tol));
  line("max_iter", std::to_string(c.reference_max_iter));

  out += "\n[analysis]\n";
  line("delta_mode", std::string(to_string(c.delta_mode.kind)));
  line("rip_samples", std::to_string(c.delta_mode.samples));
  line("rip_seed", std::to_string(c.delta_mode.seed));
  line("zero_tol", num(c.zero_tol));
  line("budget", c.budget ? num(*c.budget) : "");
  return out;
}

}  // namespace cappa::harness

#include "cappa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <fmt/core.h>

#include "cappa/error.hpp"
#include "cappa/parallel.hpp"
#include "cappa/prox.hpp"
#include "cappa/rng.hpp"

namespace cappa {

std::string_view to_string(DeltaSource s) {
  return s == DeltaSource::exact_bruteforce ? "exact_bruteforce" : "surrogate_bound";
}

double spectral_norm(const Matrix& phi, double rel_tol, int max_iter) {
  Rng rng(0x5eed);
  Vector v(phi.cols());
  for (Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = phi.transpose() * (phi * v);
    const double rayleigh = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 0 && std::abs(rayleigh - estimate) <= rel_tol * rayleigh) {
      estimate = rayleigh;
      break;
    }
    estimate = rayleigh;
  }
  return std::sqrt(estimate);
}

std::optional<std::uint64_t> binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  // Exact running product: C(n-k+i, i) stays integral at every step.
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > cap) return std::nullopt;
  }
  return static_cast<std::uint64_t>(acc);
}

namespace {

double isometry_defect(const Matrix& gram, std::span<const std::size_t> support) {
  const auto k = static_cast<Index>(support.size());
  Matrix sub(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) sub(a, b) = gram(static_cast<Index>(support[a]), static_cast<Index>(support[b]));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sub, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();  // ascending
  return std::max({0.0, 1.0 - ev(0), ev(k - 1) - 1.0});
}

void check_order(const Matrix& phi, std::size_t order) {
  if (order == 0 || order > static_cast<std::size_t>(phi.rows()) || order > static_cast<std::size_t>(phi.cols())) {
    throw InvalidArgument(fmt::format("RIP order {} must lie in [1, min(m, n)] = [1, {}]", order,
                                      std::min(phi.rows(), phi.cols())));
  }
}

}  // namespace

double support_isometry_defect(const Matrix& phi, std::span<const std::size_t> support) {
  Matrix sub(phi.rows(), static_cast<Index>(support.size()));
  for (std::size_t j = 0; j < support.size(); ++j) sub.col(static_cast<Index>(j)) = phi.col(static_cast<Index>(support[j]));
  const Matrix gram = sub.transpose() * sub;
  std::vector<std::size_t> local(support.size());
  std::iota(local.begin(), local.end(), 0);
  return isometry_defect(gram, local);
}

double rip_constant_bruteforce(const Matrix& phi, std::size_t order, unsigned jobs) {
  check_order(phi, order);
  const auto n = static_cast<std::size_t>(phi.cols());
  if (!binomial_capped(n, order, kMaxEnumeratedSupports)) {
    throw CapacityError(fmt::format("C({}, {}) supports exceed the enumeration limit of {}; use the sampled surrogate",
                                    n, order, kMaxEnumeratedSupports));
  }
  const Matrix gram = phi.transpose() * phi;
  jobs = std::max(1u, jobs);
  std::vector<double> worst(jobs, 0.0);
  // Worker w evaluates every jobs-th support of the lexicographic enumeration.
  parallel_for(jobs, jobs, [&](std::size_t w) {
    std::vector<std::size_t> support(order);
    std::iota(support.begin(), support.end(), 0);
    std::uint64_t index = 0;
    for (;;) {
      if (index % jobs == w) worst[w] = std::max(worst[w], isometry_defect(gram, support));
      ++index;
      std::size_t i = order;
      while (i > 0 && support[i - 1] == n - order + (i - 1)) --i;
      if (i == 0) break;
      ++support[i - 1];
      for (std::size_t j = i; j < order; ++j) support[j] = support[j - 1] + 1;
    }
  });
  return *std::max_element(worst.begin(), worst.end());
}

RipSurrogate rip_constant_surrogate(const Matrix& phi, std::size_t order, std::size_t samples, std::uint64_t seed) {
  check_order(phi, order);
  if (samples == 0) throw InvalidArgument("rip_constant_surrogate: samples must be >= 1");
  const Matrix gram = phi.transpose() * phi;
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto support = rng.sample_without_replacement(static_cast<std::size_t>(phi.cols()), order);
    worst = std::max(worst, isometry_defect(gram, support));
  }
  return RipSurrogate{worst};
}

RipModuli rip_moduli(double delta_2s, double phi_norm, DeltaSource source) {
  RipModuli m{};
  m.delta_2s = delta_2s;
  m.phi_norm = phi_norm;
  m.mu = 1.0 - delta_2s;
  m.lipschitz = phi_norm * std::sqrt(1.0 + delta_2s);
  m.eta_max = 2.0 * m.mu / (m.lipschitz * m.lipschitz);
  m.source = source;
  return m;
}

RipModuli estimate_moduli(const Matrix& phi, std::size_t s, const DeltaMode& mode) {
  const std::size_t order = 2 * s;
  const double norm = spectral_norm(phi);
  bool exact = mode.kind == DeltaMode::Kind::exact;
  if (mode.kind == DeltaMode::Kind::automatic) {
    exact = binomial_capped(static_cast<std::uint64_t>(phi.cols()), order, kMaxEnumeratedSupports).has_value();
  }
  if (exact) return rip_moduli(rip_constant_bruteforce(phi, order, mode.jobs), norm, DeltaSource::exact_bruteforce);
  return rip_moduli(rip_constant_surrogate(phi, order, mode.samples, mode.seed).lower_bound, norm,
                    DeltaSource::surrogate_bound);
}

double contraction_factor_squared(double eta, double mu, double lipschitz) {
  return 1.0 / (1.0 + 2.0 * eta * mu - eta * eta * lipschitz * lipschitz);
}

double epsilon_of(double c) {
  if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("epsilon_of: c must lie in (0, 1)");
  return std::log(c) / std::log((1.0 - c) / (1.0 + c));
}

double fixed_time_settle_bound(double a, double p, double b, double q) {
  if (!(a > 0.0 && b > 0.0 && p > 0.0 && p < 1.0 && q > 1.0)) {
    throw InvalidArgument("fixed_time_settle_bound: requires a, b > 0 and 0 < p < 1 < q");
  }
  return 1.0 / (a * (1.0 - p)) + 1.0 / (b * (q - 1.0));
}

bool check_lemma3(double c, double alpha) {
  if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("check_lemma3: c must lie in (0, 1)");
  return std::pow((1.0 - c) / (1.0 + c), 1.0 - alpha) > c;
}

TheoryConstants constants_from_moduli(const RipModuli& moduli, const CappaParams& params) {
  params.validate();
  const double eta = params.eta;
  if (!(moduli.eta_max > 0.0)) {
    throw InvalidConfiguration(fmt::format(
        "no admissible prox step: delta_2s = {:.6g} gives eta_max = {:.6g} <= 0", moduli.delta_2s, moduli.eta_max));
  }
  if (!(eta > 0.0 && eta < moduli.eta_max)) {
    throw InvalidConfiguration(fmt::format("eta = {:.6g} lies outside the admissible interval (0, eta_max = {:.17g})", eta,
                                           moduli.eta_max));
  }
  TheoryConstants k{};
  k.delta_2s = moduli.delta_2s;
  k.mu = moduli.mu;
  k.lipschitz = moduli.lipschitz;
  k.eta = eta;
  k.eta_max = moduli.eta_max;
  k.delta_source = moduli.source;
  k.c_bar = contraction_factor_squared(eta, k.mu, k.lipschitz);
  k.c = std::sqrt(k.c_bar);
  k.epsilon_c = epsilon_of(k.c);
  k.gamma1 = 0.5 * (1.0 + params.alpha1);
  k.gamma2 = 0.5 * (1.0 + params.alpha2);

  const double ratio = (1.0 - k.c) / (1.0 + k.c);
  auto decay_rate = [&](double kappa, double alpha) {
    return kappa / std::pow(1.0 - k.c, 1.0 - alpha) * (std::pow(ratio, 1.0 - alpha) - k.c);
  };
  k.s1 = decay_rate(params.kappa1, params.alpha1);
  k.s2 = decay_rate(params.kappa2, params.alpha2);
  k.a1 = std::pow(2.0, k.gamma1) * k.s1;
  k.a2 = std::pow(2.0, k.gamma2) * k.s2;
  if (k.s1 > 0.0 && k.s2 > 0.0) k.settle_bound = fixed_time_settle_bound(k.a1, k.gamma1, k.a2, k.gamma2);
  return k;
}

TheoryConstants derive_constants(const Matrix& phi, std::size_t s, const CappaParams& params, const DeltaMode& mode) {
  return constants_from_moduli(estimate_moduli(phi, s, mode), params);
}

double check_contraction(const SparseProblem& problem, double eta, const Vector& x_ref,
                         std::span<const Vector> samples) {
  const double kkt = kkt_residual(problem, x_ref);
  if (kkt > 1e-8) throw InvalidArgument(fmt::format("check_contraction: reference has KKT residual {:.3g} > 1e-8", kkt));
  const GradientOperator grad(problem);
  double worst = 0.0;
  for (const Vector& x : samples) {
    const double dist = (x - x_ref).norm();
    if (dist == 0.0) continue;
    const ProxEvaluation pe = prox_step(grad, x, eta);
    worst = std::max(worst, (pe.z - x_ref).norm() / dist);
  }
  return worst;
}

double gain_scale_for_budget(double settle_bound, double budget) {
  if (!(budget > 0.0)) throw InvalidArgument("gain_scale_for_budget: budget must be > 0");
  return settle_bound / budget;
}

}  // namespace cappa

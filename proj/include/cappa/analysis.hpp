#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "cappa/dynamics.hpp"
#include "cappa/linalg.hpp"
#include "cappa/problem.hpp"

namespace cappa {

/// Largest number of supports rip_constant_bruteforce will enumerate.
inline constexpr std::uint64_t kMaxEnumeratedSupports = 2'000'000;

enum class DeltaSource { exact_bruteforce, surrogate_bound };

std::string_view to_string(DeltaSource s);

/// ||Phi||_2 by power iteration on Phi^T Phi, stopping when the Rayleigh
/// quotient changes by less than rel_tol (relative) between iterations.
double spectral_norm(const Matrix& phi, double rel_tol = 1e-10, int max_iter = 10'000);

/// C(n, k), or nullopt if it exceeds `cap`.
std::optional<std::uint64_t> binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap);

/// max(1 - sigma_min^2, sigma_max^2 - 1) of the column submatrix Phi_S.
double support_isometry_defect(const Matrix& phi, std::span<const std::size_t> support);

/// Exact order-k RIP constant: the worst isometry defect over all size-k
/// supports. Throws CapacityError past kMaxEnumeratedSupports and
/// InvalidArgument unless 1 <= k <= min(m, n).
double rip_constant_bruteforce(const Matrix& phi, std::size_t order, unsigned jobs = 1);

struct RipSurrogate {
  double lower_bound;
  DeltaSource source = DeltaSource::surrogate_bound;
};

/// Lower bound on delta_k from `samples` random supports drawn from Rng(seed).
/// The support stream depends only on the seed, so more samples never lower the bound.
RipSurrogate rip_constant_surrogate(const Matrix& phi, std::size_t order, std::size_t samples,
                                    std::uint64_t seed = 0);

/// Moduli of F = grad f that follow from a delta_2s estimate.
struct RipModuli {
  double delta_2s;
  double phi_norm;
  double mu;         ///< 1 - delta_2s
  double lipschitz;  ///< ||Phi||_2 sqrt(1 + delta_2s)
  double eta_max;    ///< 2 mu / L^2; no admissible step when <= 0
  DeltaSource source;
};

RipModuli rip_moduli(double delta_2s, double phi_norm, DeltaSource source);

struct DeltaMode {
  enum class Kind { exact, surrogate, automatic };
  Kind kind = Kind::automatic;  ///< automatic: exact when enumeration fits, else surrogate
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

/// delta_2s and the derived moduli for sparsity s.
RipModuli estimate_moduli(const Matrix& phi, std::size_t s, const DeltaMode& mode = {});

struct TheoryConstants {
  double delta_2s;
  double mu;
  double lipschitz;
  double eta;
  double eta_max;
  double c_bar;
  double c;
  double epsilon_c;
  double gamma1;
  double gamma2;
  double s1;
  double s2;
  double a1;
  double a2;
  std::optional<double> settle_bound;  ///< nullopt when s1 <= 0 or s2 <= 0
  DeltaSource delta_source;

  bool certified() const noexcept { return delta_source == DeltaSource::exact_bruteforce; }
  /// Lower end of the alpha1 window (1 - epsilon(c), 1).
  double alpha1_lower() const noexcept { return 1.0 - epsilon_c; }
};

/// Contraction constants and the fixed-time settling bound for `params`
/// (params.eta is the prox step). Throws InvalidConfiguration when eta is not
/// in (0, eta_max), quoting eta_max.
TheoryConstants constants_from_moduli(const RipModuli& moduli, const CappaParams& params);

TheoryConstants derive_constants(const Matrix& phi, std::size_t s, const CappaParams& params,
                                 const DeltaMode& mode = {});

/// 1 / (1 + 2 eta mu - eta^2 L^2).
double contraction_factor_squared(double eta, double mu, double lipschitz);

/// log(c) / log((1 - c) / (1 + c)) for c in (0, 1).
double epsilon_of(double c);

/// 1 / (a (1 - p)) + 1 / (b (q - 1)) for a, b > 0, 0 < p < 1 < q.
double fixed_time_settle_bound(double a, double p, double b, double q);

/// ((1 - c) / (1 + c))^(1 - alpha) > c. Requires c in (0, 1).
bool check_lemma3(double c, double alpha);

/// max ||z(x) - x_ref|| / ||x - x_ref|| over samples with x != x_ref (0 when
/// none qualify). Throws InvalidArgument if x_ref is not a converged
/// minimizer (kkt_residual > 1e-8).
double check_contraction(const SparseProblem& problem, double eta, const Vector& x_ref,
                         std::span<const Vector> samples);

/// Uniform gain scale beta (kappa_i -> beta kappa_i) that brings the settling
/// bound down to `budget`; the bound scales as 1 / beta.
double gain_scale_for_budget(double settle_bound, double budget);

}  // namespace cappa

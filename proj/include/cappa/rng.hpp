#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace cappa {

/// Deterministic random source used for every generated instance.
///
/// The bit stream is std::mt19937_64 seeded with the 64-bit seed, whose output
/// sequence is fixed by the C++ standard. Distributions are implemented here
/// rather than taken from <random>, whose distributions are
/// implementation-defined:
///   uniform()  : (next() >> 11) * 2^-53, in [0, 1)
///   normal()   : Box-Muller on u1 = ((next() >> 11) + 1) * 2^-53 and u2 = uniform();
///                returns r*cos(2*pi*u2) then caches r*sin(2*pi*u2) for the next call
///   below(n)   : rejection sampling of next() against the largest multiple of n
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double normal();
  std::uint64_t below(std::uint64_t n);

  /// `k` distinct indices from [0, n) via a partial Fisher-Yates shuffle, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// SplitMix64 finalizer applied to `master + (stream + 1) * golden_gamma`.
/// Used to derive independent per-run seeds from one master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace cappa

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "cappa/linalg.hpp"

namespace cappa {

/// One instance of  min_x  1/2 ||y - Phi x||^2 + lambda ||x||_1.
///
/// Immutable once built. The constructor checks that the shapes agree,
/// lambda > 0 and no column of Phi is identically zero. Underdetermination
/// (m < n) is a property of generated instances, not of the type, so square
/// test problems such as Phi = I remain representable.
class SparseProblem {
 public:
  SparseProblem(Matrix phi, Vector y, double lambda);

  const Matrix& phi() const noexcept { return phi_; }
  const Vector& y() const noexcept { return y_; }
  double lambda() const noexcept { return lambda_; }
  Index m() const noexcept { return phi_.rows(); }
  Index n() const noexcept { return phi_.cols(); }

 private:
  Matrix phi_;
  Vector y_;
  double lambda_;
};

/// The signal a generated instance was built from.
struct GroundTruth {
  Vector x_true;
  std::uint32_t s = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct ProblemBundle {
  SparseProblem problem;
  std::optional<GroundTruth> truth;
};

/// Random ensemble for the measurement matrix. Both end with unit-norm columns.
///   gaussian          i.i.d. N(0,1) entries
///   orthonormal_rows  i.i.d. N(0,1) entries, rows orthonormalized (U V^T of the
///                     thin SVD), then columns normalized; much smaller RIP
///                     constants at small sizes
enum class Ensemble { gaussian, orthonormal_rows };

std::string_view to_string(Ensemble e);
Ensemble parse_ensemble(std::string_view name);

struct InstanceSpec {
  std::size_t n = 400;
  std::size_t m = 200;
  std::size_t s = 20;
  double sigma = 0.016;
  double lambda = 0.05;
  std::uint64_t seed = 7;
  Ensemble ensemble = Ensemble::gaussian;
};

/// Draws an instance. Stream order, all from one Rng(seed):
///   1. Phi entries in column-major order
///   2. the support: s indices via partial Fisher-Yates over [0, n)
///   3. x_true values on the support, in support draw order
///   4. m noise samples, scaled by sigma
/// Throws InvalidConfiguration unless s <= m < n.
ProblemBundle generate_instance(const InstanceSpec& spec);

ProblemBundle generate_gaussian_instance(std::size_t n, std::size_t m, std::size_t s, double sigma,
                                         double lambda, std::uint64_t seed);

/// Binary bundle file, all fields little-endian:
///   "CAPPA-SR\0"  u16 version=1  u32 m  u32 n  u32 s (0 without truth)
///   f64 lambda  f64 sigma  u64 seed  u8 truth-present
///   phi (m*n f64, column-major)  y (m f64)  [x_true (n f64) if truth present]
void save_bundle(const ProblemBundle& bundle, const std::filesystem::path& path);

/// Throws ParseError (naming the record) on truncated or malformed input and
/// IntegrityError when the header and payload disagree.
ProblemBundle load_bundle(const std::filesystem::path& path);

}  // namespace cappa

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "cappa/analysis.hpp"
#include "cappa/linalg.hpp"
#include "cappa/problem.hpp"
#include "cappa/rng.hpp"

namespace cappa::fixtures {

inline SparseProblem random_problem(Index m, Index n, std::uint64_t seed, double lambda = 0.1) {
  Rng rng(seed);
  Matrix phi(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) phi(i, j) = rng.normal();
  Vector y(m);
  for (Index i = 0; i < m; ++i) y(i) = rng.normal();
  return SparseProblem(std::move(phi), std::move(y), lambda);
}

inline Vector random_vector(Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

inline Vector random_sparse(Index n, std::size_t s, Rng& rng, double scale = 1.0) {
  Vector v = Vector::Zero(n);
  for (std::size_t idx : rng.sample_without_replacement(static_cast<std::size_t>(n), s))
    v(static_cast<Index>(idx)) = scale * rng.normal();
  return v;
}

inline SparseProblem identity_problem(Vector y, double lambda) {
  const Index n = y.size();
  return SparseProblem(Matrix::Identity(n, n), std::move(y), lambda);
}

/// The desk-scale experiment instance.
inline ProblemBundle desk_instance() { return generate_gaussian_instance(400, 200, 20, 0.016, 0.05, 7); }

/// Small instance with a certified (exactly enumerated) RIP constant below 1.
inline constexpr std::uint64_t kCertifiedSeed = 64;
inline ProblemBundle certified_instance(std::uint64_t seed = kCertifiedSeed) {
  return generate_instance(InstanceSpec{20, 15, 2, 0.0, 0.05, seed, Ensemble::orthonormal_rows});
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("cappa-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace cappa::fixtures

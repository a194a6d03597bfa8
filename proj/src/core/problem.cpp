#include "cappa/problem.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "cappa/error.hpp"
#include "cappa/rng.hpp"

namespace cappa {

SparseProblem::SparseProblem(Matrix phi, Vector y, double lambda)
    : phi_(std::move(phi)), y_(std::move(y)), lambda_(lambda) {
  if (phi_.rows() == 0 || phi_.cols() == 0) throw InvalidArgument("SparseProblem: empty measurement matrix");
  if (y_.size() != phi_.rows()) {
    throw InvalidArgument("SparseProblem: y has length " + std::to_string(y_.size()) + ", expected " +
                          std::to_string(phi_.rows()));
  }
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw InvalidArgument("SparseProblem: lambda must be > 0");
  for (Index j = 0; j < phi_.cols(); ++j) {
    if ((phi_.col(j).array() == 0.0).all()) {
      throw InvalidArgument("SparseProblem: column " + std::to_string(j) + " of phi is zero");
    }
  }
}

std::string_view to_string(Ensemble e) {
  switch (e) {
    case Ensemble::gaussian: return "gaussian";
    case Ensemble::orthonormal_rows: return "orthonormal_rows";
  }
  return "?";
}

Ensemble parse_ensemble(std::string_view name) {
  if (name == "gaussian") return Ensemble::gaussian;
  if (name == "orthonormal_rows") return Ensemble::orthonormal_rows;
  throw InvalidConfiguration("unknown ensemble '" + std::string(name) + "'");
}

ProblemBundle generate_instance(const InstanceSpec& spec) {
  const auto [n, m, s] = std::tuple{spec.n, spec.m, spec.s};
  if (s == 0 || s > m || m >= n) {
    throw InvalidConfiguration("instance dimensions must satisfy 0 < s <= m < n (got n=" + std::to_string(n) +
                               ", m=" + std::to_string(m) + ", s=" + std::to_string(s) + ")");
  }
  if (!(spec.sigma >= 0.0)) throw InvalidConfiguration("sigma must be >= 0");
  if (!(spec.lambda > 0.0)) throw InvalidConfiguration("lambda must be > 0");

  Rng rng(spec.seed);
  Matrix phi(static_cast<Index>(m), static_cast<Index>(n));
  for (Index j = 0; j < phi.cols(); ++j)
    for (Index i = 0; i < phi.rows(); ++i) phi(i, j) = rng.normal();

  if (spec.ensemble == Ensemble::orthonormal_rows) {
    Eigen::JacobiSVD<Matrix> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    phi = svd.matrixU() * svd.matrixV().transpose();
  }
  for (Index j = 0; j < phi.cols(); ++j) phi.col(j) /= phi.col(j).norm();

  Vector x_true = Vector::Zero(static_cast<Index>(n));
  for (std::size_t idx : rng.sample_without_replacement(n, s)) {
    double v = 0.0;
    while (v == 0.0) v = rng.normal();
    x_true(static_cast<Index>(idx)) = v;
  }

  Vector noise(static_cast<Index>(m));
  for (Index i = 0; i < noise.size(); ++i) noise(i) = rng.normal();
  Vector y = phi * x_true + spec.sigma * noise;

  GroundTruth truth{std::move(x_true), static_cast<std::uint32_t>(s), spec.sigma, spec.seed};
  return ProblemBundle{SparseProblem(std::move(phi), std::move(y), spec.lambda), std::move(truth)};
}

ProblemBundle generate_gaussian_instance(std::size_t n, std::size_t m, std::size_t s, double sigma,
                                         double lambda, std::uint64_t seed) {
  return generate_instance(InstanceSpec{n, m, s, sigma, lambda, seed, Ensemble::gaussian});
}

namespace {

constexpr std::array<char, 9> kMagic = {'C', 'A', 'P', 'P', 'A', '-', 'S', 'R', '\0'};
constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::vector<unsigned char>& out) : out_(out) {}

  template <class UInt>
  void uint(UInt v) {
    for (std::size_t b = 0; b < sizeof(UInt); ++b) out_.push_back(static_cast<unsigned char>(v >> (8 * b)));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void vec(const double* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) f64(data[i]);
  }

 private:
  std::vector<unsigned char>& out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& in) : in_(in) {}

  template <class UInt>
  UInt uint(const char* record) {
    need(sizeof(UInt), record);
    UInt v = 0;
    for (std::size_t b = 0; b < sizeof(UInt); ++b) v |= static_cast<UInt>(static_cast<UInt>(in_[pos_ + b]) << (8 * b));
    pos_ += sizeof(UInt);
    return v;
  }
  double f64(const char* record) { return std::bit_cast<double>(uint<std::uint64_t>(record)); }
  void vec(double* data, std::size_t count, const char* record) {
    if (count > remaining() / 8) {
      throw ParseError(record, "file truncated (" + std::to_string(count) + " values expected, " +
                                   std::to_string(remaining() / 8) + " available)");
    }
    for (std::size_t i = 0; i < count; ++i) data[i] = f64(record);
  }
  void bytes(char* dst, std::size_t count, const char* record) {
    need(count, record);
    std::memcpy(dst, in_.data() + pos_, count);
    pos_ += count;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t count, const char* record) const {
    if (remaining() < count) throw ParseError(record, "file truncated");
  }

  const std::vector<unsigned char>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_bundle(const ProblemBundle& bundle, const std::filesystem::path& path) {
  const SparseProblem& p = bundle.problem;
  std::vector<unsigned char> buf;
  buf.reserve(64 + 8 * static_cast<std::size_t>(p.phi().size() + p.y().size() + p.n()));
  Writer w(buf);
  for (char c : kMagic) buf.push_back(static_cast<unsigned char>(c));
  w.uint<std::uint16_t>(kVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.m()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.n()));
  w.uint<std::uint32_t>(bundle.truth ? bundle.truth->s : 0u);
  w.f64(p.lambda());
  w.f64(bundle.truth ? bundle.truth->sigma : 0.0);
  w.uint<std::uint64_t>(bundle.truth ? bundle.truth->seed : 0u);
  w.uint<std::uint8_t>(bundle.truth ? 1 : 0);
  w.vec(p.phi().data(), static_cast<std::size_t>(p.phi().size()));  // Eigen default storage is column-major
  w.vec(p.y().data(), static_cast<std::size_t>(p.y().size()));
  if (bundle.truth) {
    if (bundle.truth->x_true.size() != p.n()) throw InvalidArgument("save_bundle: x_true length differs from n");
    w.vec(bundle.truth->x_true.data(), static_cast<std::size_t>(p.n()));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

ProblemBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf);

  std::array<char, 9> magic{};
  r.bytes(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw ParseError("magic", "not a CAPPA-SR bundle");
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kVersion) throw ParseError("version", "unsupported version " + std::to_string(version));
  const auto m = r.uint<std::uint32_t>("m");
  const auto n = r.uint<std::uint32_t>("n");
  const auto s = r.uint<std::uint32_t>("s");
  const double lambda = r.f64("lambda");
  const double sigma = r.f64("sigma");
  const auto seed = r.uint<std::uint64_t>("seed");
  const auto flag = r.uint<std::uint8_t>("truth_present");
  if (flag > 1) throw ParseError("truth_present", "flag must be 0 or 1");
  if (m == 0 || n == 0) throw IntegrityError("bundle declares an empty matrix");

  const std::size_t expected = 8 * (static_cast<std::size_t>(m) * n + m + (flag ? n : 0));
  Matrix phi(m, n);
  r.vec(phi.data(), static_cast<std::size_t>(m) * n, "phi");
  Vector y(m);
  r.vec(y.data(), m, "y");
  std::optional<GroundTruth> truth;
  if (flag) {
    Vector x(n);
    r.vec(x.data(), n, "x_true");
    const auto nnz = static_cast<std::uint32_t>((x.array() != 0.0).count());
    if (nnz != s) {
      throw IntegrityError("x_true has " + std::to_string(nnz) + " nonzeros but header declares s=" +
                           std::to_string(s));
    }
    truth = GroundTruth{std::move(x), s, sigma, seed};
  } else if (s != 0) {
    throw IntegrityError("header declares s=" + std::to_string(s) + " without ground truth");
  }
  if (r.remaining() != 0) {
    throw IntegrityError(std::to_string(r.remaining()) + " trailing bytes after a payload of " +
                         std::to_string(expected) + " bytes");
  }

  try {
    return ProblemBundle{SparseProblem(std::move(phi), std::move(y), lambda), std::move(truth)};
  } catch (const InvalidArgument& e) {
    throw IntegrityError(std::string("bundle content is inconsistent: ") + e.what());
  }
}

}  // namespace cappa

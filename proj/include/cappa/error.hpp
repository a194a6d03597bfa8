#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cappa {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (negative threshold, size mismatch, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Parameters that are individually well-formed but jointly unusable.
class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `record()` names the field that could not be read.
class ParseError : public Error {
 public:
  ParseError(std::string record, const std::string& what)
      : Error("parse error in record '" + record + "': " + what), record_(std::move(record)) {}
  const std::string& record() const noexcept { return record_; }

 private:
  std::string record_;
};

/// Input that parses but contradicts itself (dimensions, counts).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Work that would exceed a hard enumeration limit.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A trajectory produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(std::uint64_t step, Eigen::VectorXd last_finite_state,
                  std::optional<std::size_t> run = std::nullopt)
      : Error(message(step, run)), step_(step), last_state_(std::move(last_finite_state)), run_(run) {}

  std::uint64_t step() const noexcept { return step_; }
  const Eigen::VectorXd& last_finite_state() const noexcept { return last_state_; }
  std::optional<std::size_t> run() const noexcept { return run_; }

  DivergenceError tagged(std::size_t run) const { return DivergenceError(step_, last_state_, run); }

 private:
  static std::string message(std::uint64_t step, std::optional<std::size_t> run) {
    std::string msg = "non-finite state at step " + std::to_string(step);
    if (run) msg += " (run " + std::to_string(*run) + ")";
    return msg;
  }

  std::uint64_t step_;
  Eigen::VectorXd last_state_;
  std::optional<std::size_t> run_;
};

}  // namespace cappa

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace nls2d {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition (grid mismatch, z < 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite data detected in a field.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t index)
      : Error(what + " (first non-finite value at index " + std::to_string(index) + ")"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// An iterative method stalled or diverged.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// One of the structural assumptions on the potential (decay, a single
/// bound state, no zero-energy resonance) does not hold.
class HypothesisError : public Error {
 public:
  HypothesisError(std::string hypothesis, const std::string& what)
      : Error("hypothesis " + hypothesis + " fails: " + what), hypothesis_(std::move(hypothesis)) {}
  const std::string& hypothesis() const noexcept { return hypothesis_; }

 private:
  std::string hypothesis_;
};

}  // namespace nls2d

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hvi {

/// Raised when an iterative numerical procedure fails to meet its tolerance.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Outer fixed-point loop exhausted its budget. Carries the observed
/// contraction history so callers can diagnose a smallness violation.
class NonConvergence : public NumericError {
public:
  NonConvergence(const std::string& what, std::vector<double> history)
      : NumericError(what), history_(std::move(history)) {}

  const std::vector<double>& history() const noexcept { return history_; }

private:
  std::vector<double> history_;
};

class AssemblyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Problem data violates a structural requirement (e.g. the smallness condition).
class ProblemError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace hvi

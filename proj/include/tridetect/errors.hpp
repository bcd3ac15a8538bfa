#pragma once

#include <stdexcept>
#include <string>

namespace tridetect {

// Caller broke a documented precondition (empty input, shape mismatch, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerically degenerate input, e.g. a zero row sum where normalization is
// required. Callers may choose a fallback.
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metric is undefined for the given samples (single class, no eligible rows).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UndefinedEvidence : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite loss or parameter during training.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(long step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

inline void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace tridetect

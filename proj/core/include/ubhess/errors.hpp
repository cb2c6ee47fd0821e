#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ubhess {

// Invalid sizes, shapes or configuration values supplied by the caller.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Parameter outside the admissible set of a model (e.g. non-positive variance).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Sigma(x) = sigma(x) sigma(x)^T is not positive definite at a queried point.
class EllipticityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An Euler state left the finite range (|x| > 1e12 or NaN).
class NumericalDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rejection loop inside a coupling sampler hit its iteration cap.
class CouplingCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A coupled chain did not meet before the configured iteration cap.
class MeetingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A wall-clock deadline configured by the caller passed during a computation.
class DeadlineExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the replicate drivers when one replicate fails; carries which one
// failed and how many finished successfully before the estimate was abandoned.
class ReplicateFailure : public std::runtime_error {
 public:
  ReplicateFailure(std::size_t replicate, std::size_t completed, const std::string& cause)
      : std::runtime_error("replicate " + std::to_string(replicate) + " failed after " +
                           std::to_string(completed) + " completed replicates: " + cause),
        replicate_(replicate),
        completed_(completed) {}

  std::size_t replicate() const noexcept { return replicate_; }
  std::size_t completed() const noexcept { return completed_; }

 private:
  std::size_t replicate_;
  std::size_t completed_;
};

}  // namespace ubhess

#pragma once

#include <stdexcept>
#include <string>

namespace pcdgan {

/// A caller broke a documented precondition (shape, range, emptiness).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// A non-finite value showed up where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string tag, const std::string& what)
      : std::runtime_error(tag + ": " + what), tag_(std::move(tag)) {}
  const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

/// Argument outside the mathematical domain of a special function.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

class SingularKernelError : public std::runtime_error {
 public:
  explicit SingularKernelError(const std::string& what) : std::runtime_error(what) {}
};

class VicinityEmptyError : public std::runtime_error {
 public:
  explicit VicinityEmptyError(const std::string& what) : std::runtime_error(what) {}
};

/// Checkpoint, dataset, or report file could not be read back.
class LoadError : public std::runtime_error {
 public:
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pcdgan

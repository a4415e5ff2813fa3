#pragma once

#include <stdexcept>
#include <string>

namespace rlab {

/// Missing or malformed parameters, unreadable inputs, inconsistent manifests.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of the operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The computation is well posed but exceeds a configured resource cap.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rlab

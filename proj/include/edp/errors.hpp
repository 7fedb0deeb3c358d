#pragma once

#include <stdexcept>
#include <string>

namespace edp {

// Invalid argument or violated precondition (bad cell id, odd detour, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input is readable but not in the expected format (bad magic, bad CSV).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model file ended early or its sections are inconsistent.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Trip that covers fewer than two distinct cells.
class DegenerateTripError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace edp

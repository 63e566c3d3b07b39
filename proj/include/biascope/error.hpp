#pragma once

#include <stdexcept>
#include <string>

namespace biascope {

// Base for every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that violates a documented contract (bad file contents, bad arguments).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// A numeric quantity is undefined for the given input (zero variance, zero norm).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace biascope

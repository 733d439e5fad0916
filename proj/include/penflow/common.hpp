#pragma once
// ============================================================================
// common.hpp - shared small types and the error hierarchy
// ============================================================================

#include <stdexcept>
#include <string>

namespace penflow {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Base class for all penflow errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (mesh files, config files). Carries a 1-based line
// number when one is known (0 otherwise).
class ParseError : public Error {
  public:
    ParseError(const std::string& what, long line = 0)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_number(line) {}
    long line_number;
};

// Structural violations of type invariants (bad indices, empty meshes,
// out-of-range parameters).
class DomainError : public Error {
  public:
    using Error::Error;
};

// Mismatched vector/matrix dimensions between operands.
class DimensionError : public Error {
  public:
    using Error::Error;
};

// Factorization hit a zero pivot. `pivot_index` is the offending row/column
// when it can be identified, -1 otherwise.
class SingularMatrixError : public Error {
  public:
    SingularMatrixError(const std::string& what, long pivot = -1)
        : Error(pivot >= 0 ? what + " (pivot index " + std::to_string(pivot) + ")"
                           : what),
          pivot_index(pivot) {}
    long pivot_index;
};

// Configuration problems (unknown key, unparsable or invalid value).
class ConfigError : public Error {
  public:
    using Error::Error;
};

// Filesystem / stream failures, annotated with the path involved.
class IOError : public Error {
  public:
    using Error::Error;
};

}  // namespace penflow

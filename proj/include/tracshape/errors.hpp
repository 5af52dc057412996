#pragma once

#include <stdexcept>
#include <string>

namespace tracshape {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (JSON syntax, wrong types, unknown keys).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally invalid data: bad indices, inverted elements, unresolvable regions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Singular system, rigid-body modes left free, or iterative non-convergence.
class SolveError : public Error {
 public:
  using Error::Error;
};

/// Bad run configuration (missing file, unknown material, inconsistent problem).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tracshape

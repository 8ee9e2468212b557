#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace randkrylov {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

// Back substitution hit a diagonal entry below the relative threshold.
class SingularTriangular : public Error {
public:
  SingularTriangular(std::size_t index, double value)
      : Error("singular triangular factor: |r(" + std::to_string(index) + "," +
              std::to_string(index) + ")| = " + std::to_string(value)),
        index_{index} {}
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

class SingularMatrix : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_{line} {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class NonSquareError : public Error {
public:
  using Error::Error;
};

class InvalidSketchSize : public Error {
public:
  using Error::Error;
};

class SingularPadeDenominator : public Error {
public:
  using Error::Error;
};

class NegativeRealEigenvalue : public Error {
public:
  using Error::Error;
};

class SchurNoConvergence : public Error {
public:
  using Error::Error;
};

class ConfigMissing : public Error {
public:
  using Error::Error;
};

class GeometryMismatch : public Error {
public:
  using Error::Error;
};

class ReferenceNotConverged : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace randkrylov

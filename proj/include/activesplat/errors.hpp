#pragma once

#include <stdexcept>
#include <string>

namespace activesplat {

/// The reconstruction oracle could not triangulate a single point from the view set.
class OracleFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Gram matrix could not be factorized even after the full jitter ladder.
class SingularKernel : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EmptyCandidates : public std::runtime_error {
public:
  EmptyCandidates() : std::runtime_error("candidate pool exhausted") {}
};

class EmptyCloud : public std::runtime_error {
public:
  EmptyCloud() : std::runtime_error("point cloud is empty") {}
};

class DimensionMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigInvalid : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace activesplat

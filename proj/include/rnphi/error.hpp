#pragma once

#include <stdexcept>
#include <string>

namespace rnphi {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A reduced node with no variance across time.
class DegenerateNodeError : public Error {
 public:
  explicit DegenerateNodeError(int node)
      : Error("degenerate node " + std::to_string(node) + ": zero variance"), node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

/// Statistic cannot be computed on the given data.
class TestUndefinedError : public Error {
 public:
  using Error::Error;
};

class DegenerateRepertoireError : public Error {
 public:
  using Error::Error;
};

/// The conditioned network state has zero probability under the TPM.
class StateUnreachableError : public Error {
 public:
  using Error::Error;
};

}  // namespace rnphi

#pragma once

#include <stdexcept>
#include <string>

namespace tpflow {

// Exit code conventions used by the command line driver:
//   0 converged / all checks passed
//   2 invalid configuration or input data
//   3 flow stagnation (step size collapse, step budget exhausted)
//   4 self-intersection / energy blow-up
//   5 linear algebra failure
class Error : public std::runtime_error {
public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

private:
  int exit_code_;
};

class ConfigError : public Error {
public:
  explicit ConfigError(std::string msg) : Error(std::move(msg), 2) {}
};

class StagnationError : public Error {
public:
  explicit StagnationError(std::string msg) : Error(std::move(msg), 3) {}
};

// Carries the node index and chord offset of the first offending pair,
// when the failure is attributable to one.
class SelfIntersectionError : public Error {
public:
  SelfIntersectionError(std::string msg, int node = -1, double offset = 0.0)
      : Error(std::move(msg), 4), node_(node), offset_(offset) {}
  int node() const { return node_; }
  double offset() const { return offset_; }

private:
  int node_;
  double offset_;
};

class LinearAlgebraError : public Error {
public:
  explicit LinearAlgebraError(std::string msg) : Error(std::move(msg), 5) {}
};

} // namespace tpflow

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace dropf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Case or model invariant violated (bad dimensions, non-PSD cost, ...).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input file could not be parsed or fails its schema.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Out-of-range argument to an operation.
class ParamError : public std::runtime_error {
 public:
  explicit ParamError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Solver could not produce a usable point.
class SolveError : public std::runtime_error {
 public:
  explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The balance equalities cannot be satisfied for any causal policy:
/// a disturbance block has no reachable policy coefficient to cancel it.
class StructuralInfeasibility : public ValidationError {
 public:
  explicit StructuralInfeasibility(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace dropf

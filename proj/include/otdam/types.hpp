#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace otdam {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Point sets are stored column-wise: a d x M matrix holds M points of R^d.
template <typename Scalar>
using Points = Matrix<Scalar>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or dimensions that do not line up.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or numerically meaningless inputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Parameter combinations that violate a precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An atom left the domain under boundary_policy = error.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

}  // namespace otdam

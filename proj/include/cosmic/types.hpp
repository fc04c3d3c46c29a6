#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cosmic {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatXd = Mat<double>;
using VecXd = Vec<double>;
using SpMat = Eigen::SparseMatrix<double>;

using NodeId = std::int64_t;
using ClassId = int;

/// Thrown for malformed inputs, infeasible configurations and violated
/// preconditions that a caller can reasonably recover from.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an optimisation step produces a NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

}  // namespace cosmic

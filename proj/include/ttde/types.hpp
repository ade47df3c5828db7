#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

namespace ttde {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// n x d sample matrix, one sample per row.
using Samples = RowMatrix;

// Raised when a computation produces a value that invalidates the model
// (nonpositive partition function, non-finite loss, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ttde

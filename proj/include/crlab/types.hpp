#pragma once

#include <Eigen/Dense>
#include <vector>

namespace crlab {

// Dense double-precision types used throughout the library. All numerics
// run in 64-bit floating point; swap these aliases to retarget.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// Sorted set of node/coordinate indices (0-based internally; config files
// and CSV headers use 1-based ids).
using IndexSet = std::vector<int>;

}  // namespace crlab

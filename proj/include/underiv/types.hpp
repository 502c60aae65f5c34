#pragma once

#include <Eigen/Dense>
#include <vector>

namespace underiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Instrument indices are 0-based throughout the library and all file formats.
using IndexList = std::vector<int>;

} // namespace underiv

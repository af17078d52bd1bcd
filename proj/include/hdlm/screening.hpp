#pragma once

#include <vector>

#include <Eigen/Core>

namespace hdlm {

struct ScreenResult {
  std::vector<int> kept;      // top-|score| indices, sorted ascending, 0-based
  Eigen::VectorXd scores;     // |corr(x_j, Y)|; constant columns score 0
  bool constant_column_warning = false;
};

// Sure independence screening: rank the columns by absolute Pearson
// correlation with Y and keep the d_keep best (ties to the lower index).
ScreenResult sis_screen(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int d_keep);

}  // namespace hdlm

#include "hdlm/screening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hdlm {

ScreenResult sis_screen(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int d_keep) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (d_keep < 1) throw std::invalid_argument("sis_screen: need d_keep >= 1");
  if (Y.size() != n) throw std::invalid_argument("sis_screen: X rows must match Y length");
  if (n < 2) throw std::invalid_argument("sis_screen: need n >= 2");

  const Eigen::VectorXd yc = Y.array() - Y.mean();
  const double y_ss = yc.squaredNorm();
  if (y_ss <= 0.0) throw std::invalid_argument("sis_screen: Y is constant");

  ScreenResult res;
  res.scores.resize(p);
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd xc = X.col(j).array() - X.col(j).mean();
    const double x_ss = xc.squaredNorm();
    if (x_ss <= 0.0) {
      res.scores[j] = 0.0;
      res.constant_column_warning = true;
      continue;
    }
    res.scores[j] = std::abs(xc.dot(yc)) / std::sqrt(x_ss * y_ss);
  }

  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (res.scores[a] != res.scores[b]) return res.scores[a] > res.scores[b];
    return a < b;
  });
  const int keep = std::min(d_keep, p);
  res.kept.assign(order.begin(), order.begin() + keep);
  std::sort(res.kept.begin(), res.kept.end());
  return res;
}

}  // namespace hdlm

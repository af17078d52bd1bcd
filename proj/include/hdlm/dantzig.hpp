#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace hdlm {

struct DantzigFit {
  Eigen::VectorXd beta_tilde;      // l1-minimal coefficients, length p
  double lambda_p = 0.0;
  double sigma = 0.0;
  double varsigma = 0.0;           // threshold multiplier; active = {j : |beta_j| > varsigma*sigma}
  std::vector<int> active;         // 0-based, ascending
  Eigen::VectorXd theta_tilde_S;   // least-squares refit on the active columns
};

// Empirical Gaussian supremum: max over m draws z ~ N(0, I_n) of
// max_j |x_j' z|.
double select_lambda_gaussian(const Eigen::MatrixXd& X, int m, std::uint64_t seed);

// argmin ||beta||_1 subject to ||X'(Y - X beta)||_inf <= lambda_p * sigma,
// solved as an LP in the positive/negative parts of beta. Throws on a
// non-optimal solver status. Designs wider than 3000 columns are refused;
// screen first.
Eigen::VectorXd dantzig_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                               double lambda_p, double sigma, double tol = 1e-9);

// Threshold at varsigma*sigma and refit by least squares on the surviving
// columns. Throws if nothing survives or the selected columns are rank
// deficient.
std::pair<std::vector<int>, Eigen::VectorXd> gaussian_dantzig(
    const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
    const Eigen::VectorXd& beta_tilde, double varsigma, double sigma);

// Both stages in one call.
DantzigFit fit_dantzig(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                       double lambda_p, double sigma, double varsigma = 1e-4,
                       double tol = 1e-9);

}  // namespace hdlm

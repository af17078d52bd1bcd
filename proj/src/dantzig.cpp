#include "hdlm/dantzig.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/QR>

#include "hdlm/lpsolver.hpp"
#include "hdlm/rng.hpp"

namespace hdlm {

double select_lambda_gaussian(const Eigen::MatrixXd& X, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("select_lambda_gaussian: need m >= 1");
  CounterRng rng(seed);
  double lambda = 0.0;
  for (int r = 0; r < m; ++r) {
    const Eigen::VectorXd z = gaussian_vector(rng, X.rows());
    lambda = std::max(lambda, (X.transpose() * z).lpNorm<Eigen::Infinity>());
  }
  return lambda;
}

Eigen::VectorXd dantzig_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                               double lambda_p, double sigma, double tol) {
  const int p = static_cast<int>(X.cols());
  if (X.rows() != Y.size())
    throw std::invalid_argument("dantzig_select: X rows must match Y length");
  if (lambda_p < 0 || sigma < 0)
    throw std::invalid_argument("dantzig_select: lambda_p and sigma must be >= 0");
  if (p > 3000)
    throw std::invalid_argument(
        "dantzig_select: p > 3000; reduce the dimension with SIS screening first");

  const double bound = lambda_p * sigma;
  const Eigen::VectorXd b = X.transpose() * Y;
  if (b.lpNorm<Eigen::Infinity>() <= bound) return Eigen::VectorXd::Zero(p);

  // beta = u - v with u, v >= 0; the sup-norm constraint becomes 2p rows
  // +-(b - G(u - v)) <= bound with G = X'X.
  const Eigen::MatrixXd G = X.transpose() * X;
  LinearProgram lp;
  lp.c = Eigen::VectorXd::Ones(2 * p);
  lp.A_ub.resize(2 * p, 2 * p);
  lp.A_ub.topLeftCorner(p, p) = G;
  lp.A_ub.topRightCorner(p, p) = -G;
  lp.A_ub.bottomLeftCorner(p, p) = -G;
  lp.A_ub.bottomRightCorner(p, p) = G;
  lp.b_ub.resize(2 * p);
  lp.b_ub.head(p) = b.array() + bound;
  lp.b_ub.tail(p) = bound - b.array();

  const LpSolution sol = solve_lp(lp, tol);
  if (sol.status != LpStatus::Optimal)
    throw std::runtime_error(std::string("dantzig_select: LP solver returned ") +
                             to_string(sol.status));
  return sol.w.head(p) - sol.w.tail(p);
}

std::pair<std::vector<int>, Eigen::VectorXd> gaussian_dantzig(
    const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
    const Eigen::VectorXd& beta_tilde, double varsigma, double sigma) {
  if (beta_tilde.size() != X.cols())
    throw std::invalid_argument("gaussian_dantzig: beta_tilde length must equal p");
  if (varsigma < 0) throw std::invalid_argument("gaussian_dantzig: varsigma must be >= 0");

  const double threshold = varsigma * sigma;
  std::vector<int> active;
  for (int j = 0; j < beta_tilde.size(); ++j)
    if (std::abs(beta_tilde[j]) > threshold) active.push_back(j);
  if (active.empty())
    throw std::runtime_error("gaussian_dantzig: no variables selected; lower varsigma or lambda_p");
  if (static_cast<Eigen::Index>(active.size()) > X.rows())
    throw std::runtime_error("gaussian_dantzig: more variables selected than samples");

  Eigen::MatrixXd Xa(X.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k)
    Xa.col(static_cast<Eigen::Index>(k)) = X.col(active[k]);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xa);
  qr.setThreshold(1e-10);
  if (qr.rank() < Xa.cols())
    throw std::runtime_error("gaussian_dantzig: selected columns are rank deficient");
  return {active, qr.solve(Y)};
}

DantzigFit fit_dantzig(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                       double lambda_p, double sigma, double varsigma, double tol) {
  DantzigFit fit;
  fit.lambda_p = lambda_p;
  fit.sigma = sigma;
  fit.varsigma = varsigma;
  fit.beta_tilde = dantzig_select(X, Y, lambda_p, sigma, tol);
  std::tie(fit.active, fit.theta_tilde_S) =
      gaussian_dantzig(X, Y, fit.beta_tilde, varsigma, sigma);
  return fit;
}

}  // namespace hdlm

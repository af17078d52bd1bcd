#include "hdlm/instruments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace hdlm {

namespace {

Eigen::MatrixXd centered(const Eigen::MatrixXd& M) {
  return M.rowwise() - M.colwise().mean();
}

std::vector<int> default_u_cols(int d) {
  std::vector<int> cols(d);
  std::iota(cols.begin(), cols.end(), 0);
  return cols;
}

Eigen::MatrixXd build_z_star(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                             const std::vector<int>& u_cols) {
  Eigen::MatrixXd zs(Z.rows(), Z.cols() + static_cast<Eigen::Index>(u_cols.size()));
  zs.leftCols(Z.cols()) = Z;
  for (std::size_t k = 0; k < u_cols.size(); ++k) {
    if (u_cols[k] < 0 || u_cols[k] >= U.cols())
      throw std::invalid_argument("instruments: U column index out of range");
    zs.col(Z.cols() + static_cast<Eigen::Index>(k)) = U.col(u_cols[k]);
  }
  return zs;
}

// Symmetric inverse square root with a pseudo-inverse cutoff for
// near-null directions.
Eigen::MatrixXd inv_sqrt_psd(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("instruments: eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, ev.maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cutoff) inv[i] = 1.0 / std::sqrt(ev[i]);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

double top_gram_eigenvalue(const Eigen::MatrixXd& U) {
  // top eigenvalue of U U' == top eigenvalue of U'U; use the smaller Gram.
  Eigen::MatrixXd G;
  if (U.rows() <= U.cols())
    G = U * U.transpose();
  else
    G = U.transpose() * U;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("instruments: Gram eigendecomposition failed");
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

}  // namespace

OmegaEstimate omega_from_cross_cov(const Eigen::MatrixXd& cross_cov, int d) {
  const int qd = static_cast<int>(cross_cov.cols());
  if (d < 1 || d > qd)
    throw std::invalid_argument("omega_from_cross_cov: need 1 <= d <= cols");
  OmegaEstimate om;
  om.d = d;
  om.q = qd - d;
  om.omega_hat = cross_cov.transpose() * cross_cov;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(om.omega_hat);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("omega_from_cross_cov: eigendecomposition failed");
  // Eigen reports ascending order; flip to descending.
  om.eigvals = es.eigenvalues().reverse();
  om.Q1.resize(qd, d);
  for (int k = 0; k < d; ++k) om.Q1.col(k) = es.eigenvectors().col(qd - 1 - k);
  const double cutoff = 1e-12 * std::max(1.0, om.eigvals[0]);
  int positive = 0;
  for (int k = 0; k < qd; ++k)
    if (om.eigvals[k] > cutoff) ++positive;
  om.rank_warning = positive < d;
  om.whiten = Eigen::MatrixXd::Identity(qd, qd);
  return om;
}

OmegaEstimate estimate_omega(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U, int d,
                             const OmegaOptions& opts) {
  const int n = static_cast<int>(Z.rows());
  const int l = static_cast<int>(U.cols());
  if (U.rows() != n) throw std::invalid_argument("estimate_omega: Z and U row mismatch");
  if (d < 1) throw std::invalid_argument("estimate_omega: need d >= 1");
  if (d > l) throw std::invalid_argument("estimate_omega: d exceeds the number of U columns");
  if (n < 2) throw std::invalid_argument("estimate_omega: need n >= 2");

  const std::vector<int> u_cols = opts.u_cols.empty() ? default_u_cols(d) : opts.u_cols;
  if (static_cast<int>(u_cols.size()) != d)
    throw std::invalid_argument("estimate_omega: u_cols size must equal d");

  const Eigen::MatrixXd Uc = centered(U);
  Eigen::MatrixXd zs = centered(build_z_star(Z, U, u_cols));
  const int qd = static_cast<int>(zs.cols());

  Eigen::MatrixXd T = Eigen::MatrixXd::Identity(qd, qd);
  if (opts.whiten) {
    T = inv_sqrt_psd((zs.transpose() * zs) / n);
    zs = zs * T;
  }

  Eigen::MatrixXd C = (Uc.transpose() * zs) / n;  // l x (q+d)
  const double threshold = 1.0 / std::sqrt(static_cast<double>(n));
  C = (C.array().abs() > threshold).select(C, 0.0);

  OmegaEstimate om = omega_from_cross_cov(C, d);
  om.whiten = T;
  return om;
}

Eigen::MatrixXd compute_A_eigen(const OmegaEstimate& omega) {
  return omega.Q1.transpose();
}

Eigen::RowVectorXd compute_A_row_from_gram(const Eigen::MatrixXd& G,
                                           const Eigen::MatrixXd& D,
                                           const Eigen::VectorXd& c_ridge) {
  const int m = static_cast<int>(G.rows());
  if (G.cols() != m || D.rows() != m || D.cols() != m || c_ridge.size() != m)
    throw std::invalid_argument("compute_A_row: dimension mismatch");
  if ((c_ridge.array() <= 0.0).any())
    throw std::invalid_argument("compute_A_row: ridge constants must be positive");

  // Row magnitudes from the ridge formula.
  Eigen::VectorXd mag(m);
  for (int k = 0; k < m; ++k) {
    Eigen::MatrixXd R = G;
    R.diagonal().array() += c_ridge[k];
    const Eigen::RowVectorXd Ak = D.row(k) * G * R.inverse();
    mag[k] = Ak.norm();
  }
  if (mag.maxCoeff() <= 0.0)
    throw std::runtime_error("compute_A_row: instrument direction undetermined");

  // Sign pattern minimizing Q(a) = sum_k (a_k A - D_k) G (a_k A - D_k)'.
  const auto objective = [&](const Eigen::RowVectorXd& A) {
    double val = 0.0;
    const double aga = A * G * A.transpose();
    for (int k = 0; k < m; ++k) {
      const double ak = A[k];
      val += ak * ak * aga - 2.0 * ak * (A * G * D.row(k).transpose())(0) +
             (D.row(k) * G * D.row(k).transpose())(0);
    }
    return val;
  };
  const auto with_signs = [&](const std::vector<int>& s) {
    Eigen::RowVectorXd A(m);
    for (int k = 0; k < m; ++k) A[k] = s[k] * mag[k];
    A /= A.norm();
    return A;
  };

  std::vector<int> best_signs(m, 1);
  Eigen::RowVectorXd best = with_signs(best_signs);
  double best_val = objective(best);
  if (m <= 13) {
    std::vector<int> s(m, 1);
    for (long mask = 1; mask < (1L << m); ++mask) {
      for (int k = 0; k < m; ++k) s[k] = (mask >> k) & 1 ? -1 : 1;
      const Eigen::RowVectorXd cand = with_signs(s);
      const double val = objective(cand);
      if (val < best_val - 1e-14) {
        best_val = val;
        best = cand;
      }
    }
  } else {
    std::vector<int> s(m, 1);
    for (int pass = 0; pass < 4; ++pass) {
      bool changed = false;
      for (int k = 0; k < m; ++k) {
        s[k] = -s[k];
        const Eigen::RowVectorXd cand = with_signs(s);
        const double val = objective(cand);
        if (val < best_val - 1e-14) {
          best_val = val;
          best = cand;
          changed = true;
        } else {
          s[k] = -s[k];
        }
      }
      if (!changed) break;
    }
  }

  // Canonical overall sign: largest-magnitude coordinate positive.
  int arg = 0;
  for (int k = 1; k < m; ++k)
    if (std::abs(best[k]) > std::abs(best[arg])) arg = k;
  if (best[arg] < 0) best = -best;
  return best;
}

Eigen::RowVectorXd compute_A_row(const Eigen::MatrixXd& Z_star, const Eigen::MatrixXd& D,
                                 const Eigen::VectorXd& c_ridge) {
  const int n = static_cast<int>(Z_star.rows());
  if (n < 2) throw std::invalid_argument("compute_A_row: need n >= 2");
  const Eigen::MatrixXd zc = centered(Z_star);
  return compute_A_row_from_gram((zc.transpose() * zc) / n, D, c_ridge);
}

InstrumentPlan build_instrument_V(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                                  const Eigen::MatrixXd& A, const Eigen::VectorXd& alpha,
                                  std::vector<int> u_cols) {
  const int n = static_cast<int>(Z.rows());
  const int q = static_cast<int>(Z.cols());
  const int d = static_cast<int>(A.rows());
  if (U.rows() != n) throw std::invalid_argument("build_instrument_V: Z and U row mismatch");
  if (alpha.size() != U.cols())
    throw std::invalid_argument("build_instrument_V: alpha length must equal cols(U)");
  if (A.cols() != q + d)
    throw std::invalid_argument("build_instrument_V: A must be d x (q+d)");
  if (alpha.norm() <= 0.0)
    throw std::invalid_argument("build_instrument_V: alpha must be nonzero");
  for (int r = 0; r < d; ++r) {
    if (std::abs(A.row(r).norm() - 1.0) > 1e-8)
      throw std::invalid_argument("build_instrument_V: rows of A must have unit length");
  }
  if (u_cols.empty()) u_cols = default_u_cols(d);
  if (static_cast<int>(u_cols.size()) != d)
    throw std::invalid_argument("build_instrument_V: u_cols size must equal d");

  InstrumentPlan plan;
  plan.A = A;
  plan.d = d;
  plan.alpha = alpha;
  plan.u_cols = u_cols;
  plan.lambda_M = top_gram_eigenvalue(U);
  plan.rho_scale = alpha.norm() * std::sqrt(plan.lambda_M);
  if (!(plan.rho_scale > 0.0))
    throw std::runtime_error("build_instrument_V: rho is zero (U has no variation)");

  plan.V.resize(n, d + 1);
  plan.V.col(0) = U * alpha / plan.rho_scale;
  plan.V.rightCols(d) = build_z_star(Z, U, u_cols) * A.transpose();
  return plan;
}

InstrumentPlan build_instrument_plan(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                                     const Eigen::VectorXd& alpha,
                                     const Eigen::VectorXd& residual,
                                     const InstrumentOptions& opts) {
  const int n = static_cast<int>(Z.rows());
  const int l = static_cast<int>(U.cols());
  const int d = opts.d;
  if (d < 1 || d > l)
    throw std::invalid_argument("build_instrument_plan: need 1 <= d <= cols(U)");

  std::vector<int> u_cols;
  if (opts.u_mode == UColumnMode::FirstD || residual.size() == 0) {
    u_cols = default_u_cols(d);
  } else {
    if (residual.size() != n)
      throw std::invalid_argument("build_instrument_plan: residual length must equal n");
    const Eigen::VectorXd rc = residual.array() - residual.mean();
    const double r_norm = rc.norm();
    Eigen::VectorXd score = Eigen::VectorXd::Zero(l);
    if (r_norm > 0) {
      for (int j = 0; j < l; ++j) {
        const Eigen::VectorXd uc = U.col(j).array() - U.col(j).mean();
        const double u_norm = uc.norm();
        if (u_norm > 0) score[j] = std::abs(uc.dot(rc)) / (u_norm * r_norm);
      }
    }
    std::vector<int> order(l);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (score[a] != score[b]) return score[a] > score[b];
      return a < b;
    });
    u_cols.assign(order.begin(), order.begin() + d);
    std::sort(u_cols.begin(), u_cols.end());
  }

  OmegaOptions om_opts;
  om_opts.whiten = opts.whiten;
  om_opts.u_cols = u_cols;
  const OmegaEstimate om = estimate_omega(Z, U, d, om_opts);

  Eigen::MatrixXd A;
  if (opts.a_mode == AMode::EigenDecomposition) {
    A = compute_A_eigen(om) * om.whiten;
  } else {
    if (d != 1)
      throw std::invalid_argument("build_instrument_plan: row-vector A requires d = 1");
    const int qd = static_cast<int>(om.omega_hat.rows());
    const double cutoff = 1e-8 * std::max(1.0, om.eigvals[0]);
    int rank = 0;
    for (int k = 0; k < qd; ++k)
      if (om.eigvals[k] > cutoff) ++rank;
    rank = std::max(rank, 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(om.omega_hat);
    Eigen::MatrixXd Qr(qd, rank);
    for (int k = 0; k < rank; ++k) Qr.col(k) = es.eigenvectors().col(qd - 1 - k);
    const Eigen::MatrixXd D = Qr * Qr.transpose();
    Eigen::VectorXd c_ridge = opts.c_ridge;
    if (c_ridge.size() == 0)
      c_ridge = Eigen::VectorXd::Constant(qd, 1.0 / std::sqrt(static_cast<double>(n)));
    const Eigen::MatrixXd zs = centered(build_z_star(Z, U, u_cols)) * om.whiten;
    const Eigen::MatrixXd G = (zs.transpose() * zs) / n;
    A = compute_A_row_from_gram(G, D, c_ridge) * om.whiten;
  }
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double norm = A.row(r).norm();
    if (norm <= 1e-12)
      throw std::runtime_error("build_instrument_plan: degenerate instrument row");
    A.row(r) /= norm;
  }

  InstrumentPlan plan = build_instrument_V(Z, U, A, alpha, u_cols);
  plan.rank_warning = om.rank_warning;
  return plan;
}

Eigen::MatrixXd instrument_V_for(const InstrumentPlan& plan, const Eigen::MatrixXd& Z_new,
                                 const Eigen::MatrixXd& U_new) {
  if (Z_new.rows() != U_new.rows())
    throw std::invalid_argument("instrument_V_for: Z and U row mismatch");
  if (U_new.cols() != plan.alpha.size())
    throw std::invalid_argument("instrument_V_for: U column mismatch with plan");
  Eigen::MatrixXd V(Z_new.rows(), plan.d + 1);
  V.col(0) = U_new * plan.alpha / plan.rho_scale;
  V.rightCols(plan.d) = build_z_star(Z_new, U_new, plan.u_cols) * plan.A.transpose();
  return V;
}

}  // namespace hdlm

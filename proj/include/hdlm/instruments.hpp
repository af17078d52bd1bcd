#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace hdlm {

// Eigen-structure of Omega = C'C where C collects the (possibly
// thresholded) cross-moments between the discarded covariates U and the
// augmented working vector Z* = (Z', U^(cols))'.
struct OmegaEstimate {
  Eigen::MatrixXd omega_hat;   // (q+d) x (q+d), symmetric PSD
  Eigen::VectorXd eigvals;     // descending
  Eigen::MatrixXd Q1;          // (q+d) x d leading eigenvectors, orthonormal
  Eigen::MatrixXd whiten;      // transform applied to Z* columns (identity if none)
  int q = 0;
  int d = 0;
  bool rank_warning = false;   // fewer than d strictly positive eigenvalues
};

struct OmegaOptions {
  bool whiten = true;           // decorrelate Z* to unit covariance first
  std::vector<int> u_cols;      // U columns forming Z*'s tail; empty = first d
};

// Pure algebra path: Omega from a given l x (q+d) cross-moment matrix.
OmegaEstimate omega_from_cross_cov(const Eigen::MatrixXd& cross_cov, int d);

// Data path: center, optionally whiten Z*, threshold each sample
// cross-moment at 1/sqrt(n), then eigendecompose C'C.
OmegaEstimate estimate_omega(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U, int d,
                             const OmegaOptions& opts = {});

// A = Q1'; rows orthonormal by construction.
Eigen::MatrixXd compute_A_eigen(const OmegaEstimate& omega);

// Ridge-regularized single-row solution: row magnitudes from
// A_k = D_k G (G + c_k I)^-1, signs by minimizing the quadratic objective
// over +-1 patterns (exhaustive up to 13 coordinates, greedy beyond),
// result normalized to unit length.
Eigen::RowVectorXd compute_A_row_from_gram(const Eigen::MatrixXd& G,
                                           const Eigen::MatrixXd& D,
                                           const Eigen::VectorXd& c_ridge);
Eigen::RowVectorXd compute_A_row(const Eigen::MatrixXd& Z_star, const Eigen::MatrixXd& D,
                                 const Eigen::VectorXd& c_ridge);

struct InstrumentPlan {
  Eigen::MatrixXd A;           // d x (q+d), unit-norm rows
  int d = 1;
  Eigen::VectorXd alpha;       // direction in U-space, length l
  double rho_scale = 0.0;      // ||alpha||_2 * sqrt(lambda_M)
  double lambda_M = 0.0;       // top eigenvalue of the Gram U U'
  Eigen::MatrixXd V;           // n x (d+1): [U alpha / rho, Z* A']
  std::vector<int> u_cols;     // U columns in Z*'s tail (0-based)
  std::string alpha_source = "user";
  bool rank_warning = false;
};

// Assemble V for given A and alpha. u_cols empty = first d columns of U.
InstrumentPlan build_instrument_V(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                                  const Eigen::MatrixXd& A, const Eigen::VectorXd& alpha,
                                  std::vector<int> u_cols = {});

enum class UColumnMode { FirstD, ResidualCorrelation };
enum class AMode { EigenDecomposition, RowVector };

struct InstrumentOptions {
  int d = 1;
  UColumnMode u_mode = UColumnMode::ResidualCorrelation;
  AMode a_mode = AMode::EigenDecomposition;
  bool whiten = true;
  Eigen::VectorXd c_ridge;  // RowVector mode; empty = 1/sqrt(n) everywhere
};

// Full construction: pick U columns, estimate Omega, build A (mapped back
// through the whitening transform and row-normalized), assemble V.
// `residual` drives the data-driven U-column pick; it may be empty when
// u_mode is FirstD.
InstrumentPlan build_instrument_plan(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& U,
                                     const Eigen::VectorXd& alpha,
                                     const Eigen::VectorXd& residual,
                                     const InstrumentOptions& opts = {});

// Apply a frozen plan (A, alpha, rho) to new observations.
Eigen::MatrixXd instrument_V_for(const InstrumentPlan& plan, const Eigen::MatrixXd& Z_new,
                                 const Eigen::MatrixXd& U_new);

}  // namespace hdlm

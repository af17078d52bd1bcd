#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "hdlm/datamodel.hpp"
#include "hdlm/dantzig.hpp"
#include "hdlm/instruments.hpp"

namespace hdlm {

// Gaussian product kernel of order 2.
struct KernelSpec {
  double h = 1.0;    // bandwidth, > 0
  int dim = 1;       // kernel input dimension d+1
  int order = 2;     // even, >= 2; only 2 is implemented (Gaussian)
  bool leave_one_out = false;  // drop the self term k == i in kernel sums

  void validate() const;
};

// (1/h^dim) * prod_j K(diff_j / h) with K the standard normal density.
double product_kernel_weight(const Eigen::VectorXd& diff, double h);

// h = scale * n^(-1/(2(k+d+1))).
double bandwidth_rule(int n, int d, int k, double scale);

// Row i of the result is M_i minus the kernel-weighted average of all rows
// of M at V_i. Throws when some row's weight sum underflows.
Eigen::MatrixXd nw_residualize(const Eigen::MatrixXd& M, const Eigen::MatrixXd& V,
                               const KernelSpec& kernel);

// Nadaraya-Watson estimate of E(Y - theta'Z | V = v).
double estimate_g(const Eigen::VectorXd& theta, const Eigen::MatrixXd& Z,
                  const Eigen::VectorXd& Y, const Eigen::MatrixXd& V,
                  const KernelSpec& kernel, const Eigen::VectorXd& v_query);
Eigen::VectorXd estimate_g_many(const Eigen::VectorXd& theta, const Eigen::MatrixXd& Z,
                                const Eigen::VectorXd& Y, const Eigen::MatrixXd& V,
                                const KernelSpec& kernel, const Eigen::MatrixXd& V_query);

enum class PlmVariant { GivenAlpha, DantzigAlpha, HeteroGivenAlpha, HeteroDantzigAlpha };

struct PlmFit {
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd S_n;
  Eigen::VectorXd S_n_eigenvalues;   // ascending
  Eigen::VectorXd g_values;          // fitted g at the training V
  double g_bar = 0.0;                // mean of g_values
  Eigen::MatrixXd Z_resid;
  Eigen::VectorXd Y_resid;
  double sigma_V2_hat = 0.0;
  PlmVariant variant = PlmVariant::GivenAlpha;

  // What prediction needs: the kernel, the standardization applied to V,
  // and the training sample it smooths over.
  KernelSpec kernel;
  double bandwidth_scale = 0.0;
  Eigen::VectorXd v_scale;           // per-column divisors applied before the kernel
  Eigen::MatrixXd V_train_scaled;
  Eigen::VectorXd partial_resid;     // Y - theta'Z at the training points
};

struct PlmOptions {
  double bandwidth_scale = 0.0;  // <= 0: rule of thumb (geometric mean of
                                 // column sds of the V fed to the kernel)
  int kernel_order = 2;
  bool leave_one_out = false;
  bool standardize_v = true;     // scale V columns to unit sd before the kernel
  PlmVariant variant = PlmVariant::GivenAlpha;
};

// Residualize Y and Z on V, then theta = S_n^-1 (1/n) sum Z~_i Y~_i.
// Supplying per-sample variances switches to the 1/sigma_i^2 weighted
// moments (the heteroscedastic form).
PlmFit fit_plm(const Eigen::MatrixXd& Z, const Eigen::VectorXd& Y, const Eigen::MatrixXd& V,
               const PlmOptions& opts = {}, const Eigen::VectorXd& variances = {});

struct PostDantzigOptions {
  int d = 1;
  double bandwidth_scale = 0.0;
  UColumnMode u_mode = UColumnMode::ResidualCorrelation;
  AMode a_mode = AMode::EigenDecomposition;
  bool whiten = true;
  // When the Dantzig gamma restricted to U is exactly zero (every nonzero
  // coordinate of beta_tilde got selected), fall back to the covariance of
  // U with the submodel residual as the alpha direction instead of failing.
  bool allow_alpha_fallback = true;
};

struct PostDantzigFit {
  PlmFit plm;
  InstrumentPlan plan;
  SubmodelSplit split;
};

// End-to-end bias-corrected fit on a selected submodel: alpha from the
// Dantzig gamma, A from the Omega eigendecomposition, V assembled, then
// fit_plm on (Z, Y, V).
PostDantzigFit fit_post_dantzig(const Dataset& data, const SubmodelSplit& split,
                                const DantzigFit& dfit,
                                const PostDantzigOptions& opts = {});

// theta'Z + g(V) per row.
Eigen::VectorXd predict_full(const PlmFit& fit, const Eigen::MatrixXd& Z_new,
                             const Eigen::MatrixXd& V_new);

// theta'Z + mean of the fitted g over the training points.
Eigen::VectorXd predict_submodel(const PlmFit& fit, const Eigen::MatrixXd& Z_new);

// Plain least-squares submodel prediction theta_tilde_S' Z.
Eigen::VectorXd predict_ols(const Eigen::VectorXd& theta_tilde_S,
                            const Eigen::MatrixXd& Z_new);

}  // namespace hdlm

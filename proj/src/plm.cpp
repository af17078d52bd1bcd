#include "hdlm/plm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hdlm {

namespace {

constexpr double kLogUnderflow = -690.77552789821371;  // log(1e-300)

// log of the kernel normalization (2 pi h^2)^(-dim/2).
double log_kernel_const(double h, int dim) {
  return -0.5 * dim * std::log(2.0 * M_PI) - dim * std::log(h);
}

// Kernel smooth of the columns of M at the training points themselves.
// Weight constants cancel in the ratio; the underflow check still accounts
// for them.
Eigen::MatrixXd smooth_at_train(const Eigen::MatrixXd& M, const Eigen::MatrixXd& V,
                                const KernelSpec& kernel) {
  const Eigen::Index n = V.rows();
  const double log_c = log_kernel_const(kernel.h, kernel.dim);
  Eigen::MatrixXd out(n, M.cols());
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w = (-0.5 *
         ((V.rowwise() - V.row(i)) / kernel.h).rowwise().squaredNorm().array())
            .exp();
    if (kernel.leave_one_out) w[i] = 0.0;
    const double denom = w.sum();
    if (denom <= 0.0 || log_c + std::log(denom) < kLogUnderflow)
      throw std::runtime_error("nw_residualize: bandwidth too small for sample spread");
    out.row(i) = (w.transpose() * M) / denom;
  }
  return out;
}

Eigen::VectorXd smooth_at_queries(const Eigen::VectorXd& values, const Eigen::MatrixXd& V,
                                  const Eigen::MatrixXd& V_query, const KernelSpec& kernel) {
  const double log_c = log_kernel_const(kernel.h, kernel.dim);
  Eigen::VectorXd out(V_query.rows());
  Eigen::VectorXd w(V.rows());
  for (Eigen::Index i = 0; i < V_query.rows(); ++i) {
    w = (-0.5 *
         ((V.rowwise() - V_query.row(i)) / kernel.h).rowwise().squaredNorm().array())
            .exp();
    const double denom = w.sum();
    if (denom <= 0.0 || log_c + std::log(denom) < kLogUnderflow)
      throw std::runtime_error("kernel denominator underflow at query row " +
                               std::to_string(i + 1));
    out[i] = w.dot(values) / denom;
  }
  return out;
}

Eigen::VectorXd column_sds(const Eigen::MatrixXd& M) {
  const Eigen::Index n = M.rows();
  Eigen::VectorXd sds(M.cols());
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    const Eigen::ArrayXd c = M.col(j).array() - M.col(j).mean();
    sds[j] = n > 1 ? std::sqrt(c.square().sum() / static_cast<double>(n - 1)) : 0.0;
  }
  return sds;
}

}  // namespace

void KernelSpec::validate() const {
  if (!(h > 0)) throw std::invalid_argument("KernelSpec: bandwidth must be positive");
  if (dim < 1) throw std::invalid_argument("KernelSpec: dim must be >= 1");
  if (order != 2)
    throw std::invalid_argument("KernelSpec: only the order-2 Gaussian kernel is implemented");
}

double product_kernel_weight(const Eigen::VectorXd& diff, double h) {
  if (!(h > 0)) throw std::invalid_argument("product_kernel_weight: h must be positive");
  const int dim = static_cast<int>(diff.size());
  return std::exp(log_kernel_const(h, dim) - 0.5 * (diff / h).squaredNorm());
}

double bandwidth_rule(int n, int d, int k, double scale) {
  if (n < 2) throw std::invalid_argument("bandwidth_rule: need n >= 2");
  if (!(scale > 0)) throw std::invalid_argument("bandwidth_rule: scale must be positive");
  const double exponent = -1.0 / (2.0 * (k + d + 1));
  return scale * std::pow(static_cast<double>(n), exponent);
}

Eigen::MatrixXd nw_residualize(const Eigen::MatrixXd& M, const Eigen::MatrixXd& V,
                               const KernelSpec& kernel) {
  kernel.validate();
  if (M.rows() != V.rows())
    throw std::invalid_argument("nw_residualize: M and V row mismatch");
  if (V.cols() != kernel.dim)
    throw std::invalid_argument("nw_residualize: V column count must equal kernel dim");
  return M - smooth_at_train(M, V, kernel);
}

double estimate_g(const Eigen::VectorXd& theta, const Eigen::MatrixXd& Z,
                  const Eigen::VectorXd& Y, const Eigen::MatrixXd& V,
                  const KernelSpec& kernel, const Eigen::VectorXd& v_query) {
  Eigen::MatrixXd q(1, v_query.size());
  q.row(0) = v_query.transpose();
  return estimate_g_many(theta, Z, Y, V, kernel, q)[0];
}

Eigen::VectorXd estimate_g_many(const Eigen::VectorXd& theta, const Eigen::MatrixXd& Z,
                                const Eigen::VectorXd& Y, const Eigen::MatrixXd& V,
                                const KernelSpec& kernel, const Eigen::MatrixXd& V_query) {
  kernel.validate();
  if (Z.rows() != Y.size() || Z.rows() != V.rows())
    throw std::invalid_argument("estimate_g: row mismatch");
  if (Z.cols() != theta.size())
    throw std::invalid_argument("estimate_g: theta length must equal cols(Z)");
  if (V.cols() != kernel.dim || V_query.cols() != kernel.dim)
    throw std::invalid_argument("estimate_g: V column count must equal kernel dim");
  const Eigen::VectorXd partial = Y - Z * theta;
  return smooth_at_queries(partial, V, V_query, kernel);
}

PlmFit fit_plm(const Eigen::MatrixXd& Z, const Eigen::VectorXd& Y, const Eigen::MatrixXd& V,
               const PlmOptions& opts, const Eigen::VectorXd& variances) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index q = Z.cols();
  if (Y.size() != n || V.rows() != n) throw std::invalid_argument("fit_plm: row mismatch");
  if (n < 2) throw std::invalid_argument("fit_plm: need n >= 2");
  if (q < 1) throw std::invalid_argument("fit_plm: Z needs at least one column");
  const bool weighted = variances.size() > 0;
  if (weighted) {
    if (variances.size() != n)
      throw std::invalid_argument("fit_plm: variances length must equal n");
    if ((variances.array() <= 0.0).any())
      throw std::invalid_argument("fit_plm: variances must be positive");
  }

  PlmFit fit;
  fit.variant = opts.variant;
  if (weighted) {
    fit.variant = opts.variant == PlmVariant::DantzigAlpha ? PlmVariant::HeteroDantzigAlpha
                                                           : PlmVariant::HeteroGivenAlpha;
  }

  // Kernel distances run on sd-standardized V columns, so one bandwidth
  // treats coordinates with very different spreads evenly.
  fit.v_scale = Eigen::VectorXd::Ones(V.cols());
  if (opts.standardize_v) {
    const Eigen::VectorXd sds = column_sds(V);
    for (Eigen::Index j = 0; j < V.cols(); ++j)
      if (sds[j] > 0) fit.v_scale[j] = sds[j];
  }
  Eigen::MatrixXd Vs = V * fit.v_scale.cwiseInverse().asDiagonal();

  double scale = opts.bandwidth_scale;
  if (!(scale > 0)) {
    const Eigen::VectorXd sds = column_sds(Vs);
    double log_sum = 0.0;
    Eigen::Index informative = 0;
    for (Eigen::Index j = 0; j < sds.size(); ++j) {
      if (sds[j] > 0) {
        log_sum += std::log(sds[j]);
        ++informative;
      }
    }
    scale = informative > 0 ? std::exp(log_sum / informative) : 1.0;
  }
  fit.bandwidth_scale = scale;

  const int d = static_cast<int>(V.cols()) - 1;
  fit.kernel.h = bandwidth_rule(static_cast<int>(n), d, opts.kernel_order, scale);
  fit.kernel.dim = static_cast<int>(V.cols());
  fit.kernel.order = opts.kernel_order;
  fit.kernel.leave_one_out = opts.leave_one_out;

  Eigen::MatrixXd M(n, q + 1);
  M.col(0) = Y;
  M.rightCols(q) = Z;
  const Eigen::MatrixXd R = nw_residualize(M, Vs, fit.kernel);
  fit.Y_resid = R.col(0);
  fit.Z_resid = R.rightCols(q);

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (weighted) w = variances.cwiseInverse();
  fit.S_n = (fit.Z_resid.transpose() * w.asDiagonal() * fit.Z_resid) / static_cast<double>(n);
  const Eigen::VectorXd cross =
      (fit.Z_resid.transpose() * w.asDiagonal() * fit.Y_resid) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.S_n);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("fit_plm: eigendecomposition of S_n failed");
  fit.S_n_eigenvalues = es.eigenvalues();
  const double ev_max = fit.S_n_eigenvalues[q - 1];
  const double ev_min = fit.S_n_eigenvalues[0];
  if (!(ev_max > 0) || ev_min <= 1e-10 * ev_max)
    throw std::runtime_error(
        "fit_plm: S_n is singular; instrument V explains Z completely (condition violated)");

  fit.theta_hat = es.eigenvectors() *
                  (es.eigenvectors().transpose() * cross).cwiseQuotient(fit.S_n_eigenvalues);

  // g at the training points comes out of the residualization for free:
  // smooth(Y - theta'Z) = (Y - Y~) - (Z - Z~)'theta.
  fit.partial_resid = Y - Z * fit.theta_hat;
  fit.g_values = (M.col(0) - fit.Y_resid) - (M.rightCols(q) - fit.Z_resid) * fit.theta_hat;
  fit.g_bar = fit.g_values.mean();
  fit.sigma_V2_hat = (fit.Y_resid - fit.Z_resid * fit.theta_hat).squaredNorm() /
                     static_cast<double>(n);
  fit.V_train_scaled = std::move(Vs);
  return fit;
}

PostDantzigFit fit_post_dantzig(const Dataset& data, const SubmodelSplit& split,
                                const DantzigFit& dfit, const PostDantzigOptions& opts) {
  data.validate();
  const int p = static_cast<int>(data.p());
  split.validate(p);
  if (split.idx_Z != dfit.active)
    throw std::invalid_argument("fit_post_dantzig: split does not match the Dantzig active set");
  if (split.idx_U.empty())
    throw std::invalid_argument("fit_post_dantzig: no complement; nothing to correct");
  if (dfit.beta_tilde.size() != p)
    throw std::invalid_argument("fit_post_dantzig: beta_tilde length must equal p");

  const Eigen::MatrixXd Z = select_columns(data.X, split.idx_Z);
  const Eigen::MatrixXd U = select_columns(data.X, split.idx_U);

  Eigen::VectorXd alpha = select_entries(dfit.beta_tilde, split.idx_U);
  std::string alpha_source = "dantzig_gamma";
  if (alpha.norm() <= 0.0) {
    if (!opts.allow_alpha_fallback)
      throw std::runtime_error("fit_post_dantzig: Dantzig gamma is zero on the complement");
    const Eigen::VectorXd r_sub = data.Y - Z * dfit.theta_tilde_S;
    const Eigen::VectorXd rc = r_sub.array() - r_sub.mean();
    alpha = (U.rowwise() - U.colwise().mean()).transpose() * rc / static_cast<double>(data.n());
    alpha_source = "residual_covariance_fallback";
    if (alpha.norm() <= 0.0) {
      // Exact interpolation: the residual carries nothing. Any direction
      // works (the correction is a no-op); take the first coordinate.
      alpha = Eigen::VectorXd::Zero(U.cols());
      alpha[0] = 1.0;
      alpha_source = "unit_fallback";
    }
  }

  const Eigen::VectorXd dantzig_resid = data.Y - data.X * dfit.beta_tilde;
  InstrumentOptions iopts;
  iopts.d = opts.d;
  iopts.u_mode = opts.u_mode;
  iopts.a_mode = opts.a_mode;
  iopts.whiten = opts.whiten;

  PostDantzigFit out;
  out.plan = build_instrument_plan(Z, U, alpha, dantzig_resid, iopts);
  out.plan.alpha_source = alpha_source;

  PlmOptions popts;
  popts.bandwidth_scale = opts.bandwidth_scale;
  popts.variant = PlmVariant::DantzigAlpha;
  out.plm = fit_plm(Z, data.Y, out.plan.V, popts);
  out.split = split;
  return out;
}

Eigen::VectorXd predict_full(const PlmFit& fit, const Eigen::MatrixXd& Z_new,
                             const Eigen::MatrixXd& V_new) {
  if (Z_new.cols() != fit.theta_hat.size())
    throw std::invalid_argument("predict_full: Z column mismatch");
  if (V_new.cols() != fit.V_train_scaled.cols())
    throw std::invalid_argument("predict_full: V column mismatch");
  if (Z_new.rows() != V_new.rows())
    throw std::invalid_argument("predict_full: Z and V row mismatch");
  const Eigen::MatrixXd Vq = V_new * fit.v_scale.cwiseInverse().asDiagonal();
  const Eigen::VectorXd g =
      smooth_at_queries(fit.partial_resid, fit.V_train_scaled, Vq, fit.kernel);
  return Z_new * fit.theta_hat + g;
}

Eigen::VectorXd predict_submodel(const PlmFit& fit, const Eigen::MatrixXd& Z_new) {
  if (Z_new.cols() != fit.theta_hat.size())
    throw std::invalid_argument("predict_submodel: Z column mismatch");
  return (Z_new * fit.theta_hat).array() + fit.g_bar;
}

Eigen::VectorXd predict_ols(const Eigen::VectorXd& theta_tilde_S,
                            const Eigen::MatrixXd& Z_new) {
  if (Z_new.cols() != theta_tilde_S.size())
    throw std::invalid_argument("predict_ols: Z column mismatch");
  return Z_new * theta_tilde_S;
}

}  // namespace hdlm

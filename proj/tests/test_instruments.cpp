#include <doctest.h>

#include <Eigen/Dense>

#include "hdlm/instruments.hpp"
#include "hdlm/plm.hpp"
#include "hdlm/rng.hpp"
#include "oracles.hpp"

using namespace hdlm;

namespace {

// Random rank-d cross-covariance matrix (l x (q+d)).
Eigen::MatrixXd random_rank_d(int l, int q, int d, std::uint64_t seed) {
  CounterRng rng(seed);
  return gaussian_matrix(rng, l, d) * gaussian_matrix(rng, d, q + d);
}

}  // namespace

TEST_CASE("omega_from_cross_cov recovers rank-1 eigenstructure") {
  // C = 2 e1' as a 1 x 4 cross-covariance: Omega = 4 e1 e1', Q1 = +-e1.
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(1, 4);
  C(0, 0) = 2.0;
  const OmegaEstimate om = omega_from_cross_cov(C, 1);
  CHECK(om.omega_hat(0, 0) == doctest::Approx(4.0));
  CHECK(om.omega_hat.norm() == doctest::Approx(4.0));
  CHECK(om.eigvals[0] == doctest::Approx(4.0));
  CHECK(om.eigvals.tail(3).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(std::abs(om.Q1(0, 0)) == doctest::Approx(1.0));
  CHECK(om.Q1.bottomRows(3).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(!om.rank_warning);

  const Eigen::MatrixXd A = compute_A_eigen(om);
  CHECK(std::abs(A(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("estimate_omega thresholds weak cross-moments") {
  // n = 4 so the threshold is 1/2; a cross-moment of 0.1 must vanish.
  const int n = 4;
  Eigen::MatrixXd Z(n, 1);
  Z << 1, -1, 1, -1;
  OmegaOptions opts;
  opts.whiten = false;

  Eigen::MatrixXd U_small(n, 1);
  U_small << 0.1, -0.1, 0.1, -0.1;  // (1/n) sum U Z = 0.1 <= 1/2, and U^2 = 0.01
  const OmegaEstimate weak = estimate_omega(Z, U_small, 1, opts);
  CHECK(weak.omega_hat.isZero(0.0));
  CHECK(weak.rank_warning);

  Eigen::MatrixXd U_big(n, 1);
  U_big << 2, -2, 2, -2;  // moments 2 and 4 both survive
  const OmegaEstimate strong = estimate_omega(Z, U_big, 1, opts);
  CHECK(strong.omega_hat.cwiseAbs().minCoeff() > 0.0);
  CHECK(!strong.rank_warning);

  CHECK_THROWS_AS(estimate_omega(Z, U_small, 2, opts), std::invalid_argument);
}

TEST_CASE("estimate_omega zeroes the off-block when U is independent of Z") {
  // With sd-0.4 U against whitened Z*, a null cross-moment exceeds the
  // 1/sqrt(n) threshold only when |N(0,1)| > 2.5 (p ~ 0.012), so entries
  // off the U block are exactly zero ~99% of the time (measured 98.9%).
  const int n = 5000, q = 3, l = 5, d = 1;
  int zero = 0, total = 0;
  for (int rep = 0; rep < 10; ++rep) {
    CounterRng rng(derive_seed(500, rep));
    const Eigen::MatrixXd Z = gaussian_matrix(rng, n, q);
    const Eigen::MatrixXd U = 0.4 * gaussian_matrix(rng, n, l);
    const OmegaEstimate om = estimate_omega(Z, U, d);
    for (int i = 0; i < q + d; ++i) {
      for (int j = 0; j < q + d; ++j) {
        if (i >= q && j >= q) continue;
        ++total;
        if (om.omega_hat(i, j) == 0.0) ++zero;
      }
    }
  }
  CHECK(static_cast<double>(zero) / total >= 0.95);
}

TEST_CASE("compute_A_eigen rows are orthonormal") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int l = 3 + static_cast<int>(s % 4);
    const int q = 2 + static_cast<int>(s % 3);
    const int d = 1 + static_cast<int>(s % 2);
    const Eigen::MatrixXd C = random_rank_d(l, q, std::min(d, l), derive_seed(s, 40));
    const Eigen::MatrixXd A = compute_A_eigen(omega_from_cross_cov(C, std::min(d, l)));
    const Eigen::MatrixXd AAt = A * A.transpose();
    CHECK((AAt - Eigen::MatrixXd::Identity(A.rows(), A.rows())).lpNorm<Eigen::Infinity>() <
          1e-10);
  }
}

TEST_CASE("A = Q1' reproduces the population cross-covariance action") {
  // For rank-d Sigma_{U,Z*} with Cov(Z*) = I, the projection through A
  // leaves Sigma's action unchanged: Sigma A'(AA')^-1 A z == Sigma z.
  for (std::uint64_t s = 0; s < 100; ++s) {
    const int l = 3 + static_cast<int>(s % 5);
    const int q = 2 + static_cast<int>(s % 4);
    const int d = 1 + static_cast<int>(s % std::min(3, l));
    const Eigen::MatrixXd sigma = random_rank_d(l, q, d, derive_seed(s, 41));
    const Eigen::MatrixXd A = compute_A_eigen(omega_from_cross_cov(sigma, d));
    CounterRng rng(derive_seed(s, 42));
    const Eigen::VectorXd z = gaussian_vector(rng, q + d);
    const Eigen::MatrixXd proj =
        A.transpose() * (A * A.transpose()).inverse() * A;
    const double resid = (sigma * proj * z - sigma * z).norm();
    CHECK(resid < 1e-8);
  }
}

TEST_CASE("compute_A_row ridge limits") {
  const int m = 4;
  const Eigen::MatrixXd G = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd D = Eigen::MatrixXd::Identity(m, m);

  // c -> 0 with D = I: every magnitude tends to 1, so A is the equal-weight
  // unit vector up to signs.
  const Eigen::RowVectorXd A0 =
      compute_A_row_from_gram(G, D, Eigen::VectorXd::Constant(m, 1e-10));
  for (int k = 0; k < m; ++k)
    CHECK(std::abs(A0[k]) == doctest::Approx(1.0 / std::sqrt(4.0)).epsilon(1e-6));
  CHECK(A0.norm() == doctest::Approx(1.0));

  // c = 1 halves all magnitudes; the normalized direction is unchanged.
  const Eigen::RowVectorXd A1 =
      compute_A_row_from_gram(G, D, Eigen::VectorXd::Constant(m, 1.0));
  CHECK((A1 - A0).lpNorm<Eigen::Infinity>() < 1e-6);

  // D = 0 has no direction.
  CHECK_THROWS_WITH_AS(
      compute_A_row_from_gram(G, Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Ones(m)),
      doctest::Contains("undetermined"), std::runtime_error);

  CHECK_THROWS_AS(compute_A_row_from_gram(G, D, Eigen::VectorXd::Zero(m)),
                  std::invalid_argument);
}

TEST_CASE("compute_A_row is invariant to rescaling D") {
  CounterRng rng(77);
  const int m = 5;
  const Eigen::MatrixXd zs = gaussian_matrix(rng, 400, m);
  Eigen::MatrixXd D = gaussian_matrix(rng, m, m);
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(m, 0.05);
  const Eigen::RowVectorXd A1 = compute_A_row(zs, D, c);
  const Eigen::RowVectorXd A2 = compute_A_row(zs, 7.5 * D, c);
  CHECK((A1 - A2).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(A1.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_instrument_V assembles the plan") {
  CounterRng rng(21);
  const int n = 40, q = 2, l = 3, d = 1;
  const Eigen::MatrixXd Z = gaussian_matrix(rng, n, q);
  const Eigen::MatrixXd U = gaussian_matrix(rng, n, l);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, q + d);
  A(0, 0) = 1.0;  // selector row e1'
  Eigen::VectorXd alpha(l);
  alpha << 0.5, -1.0, 0.25;

  const InstrumentPlan plan = build_instrument_V(Z, U, A, alpha);
  CHECK(plan.rho_scale == doctest::Approx(alpha.norm() * std::sqrt(plan.lambda_M)));
  CHECK((plan.V.col(0) - U * alpha / plan.rho_scale).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((plan.V.col(1) - Z.col(0)).lpNorm<Eigen::Infinity>() < 1e-14);

  // Scaling alpha cancels out of the first instrument coordinate.
  const InstrumentPlan plan2 = build_instrument_V(Z, U, A, 2.0 * alpha);
  CHECK((plan2.V.col(0) - plan.V.col(0)).lpNorm<Eigen::Infinity>() < 1e-14);

  // One-column U: the first coordinate reduces to u / sigma_max(u).
  const Eigen::MatrixXd U1 = U.leftCols(1);
  const InstrumentPlan plan3 =
      build_instrument_V(Z, U1, A, Eigen::VectorXd::Ones(1));
  CHECK((plan3.V.col(0) - U1.col(0) / U1.col(0).norm()).lpNorm<Eigen::Infinity>() < 1e-12);

  CHECK_THROWS_AS(build_instrument_V(Z, U, A, Eigen::VectorXd::Zero(l)),
                  std::invalid_argument);
  A(0, 0) = 2.0;  // not unit length
  CHECK_THROWS_AS(build_instrument_V(Z, U, A, alpha), std::invalid_argument);
}

TEST_CASE("instrument_V_for applies a frozen plan to new data") {
  CounterRng rng(31);
  const int n = 60, q = 2, l = 4;
  const Eigen::MatrixXd Z = gaussian_matrix(rng, n, q);
  const Eigen::MatrixXd U = gaussian_matrix(rng, n, l);
  Eigen::VectorXd alpha(l);
  alpha << 1, 0.5, -0.5, 0.2;
  InstrumentOptions opts;
  opts.u_mode = UColumnMode::FirstD;
  const InstrumentPlan plan = build_instrument_plan(Z, U, alpha, Eigen::VectorXd(), opts);
  CHECK((instrument_V_for(plan, Z, U) - plan.V).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(plan.V.cols() == 2);
  CHECK(plan.A.row(0).norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("corrected-model residual is orthogonal to (Z, V)") {
  // Jointly Gaussian (Z, U) with a one-factor U, so the linearity condition
  // holds; with A built from the thresholded Omega estimate, the residual
  // xi = Y - theta'Z - g(V) has no linear projection on (Z, V). g is
  // estimated with an undersmoothed kernel (scale 0.1) so its own bias does
  // not contaminate the slopes.
  const int n = 5000, q = 2, l = 5;
  Eigen::VectorXd psi(q);
  psi << 0.8, -0.5;
  Eigen::VectorXd cs(4);
  cs << 0.9, -0.7, 0.5, 0.3;
  Eigen::VectorXd gamma(l);
  gamma << 0.5, 0.8, -0.6, 0.4, 0.7;
  Eigen::VectorXd theta(q);
  theta << 1.0, -0.5;
  Eigen::VectorXd alpha(l);
  alpha << 1.0, -0.3, 0.5, 0.2, -0.4;

  int pass = 0;
  const int reps = 5;
  for (int rep = 0; rep < reps; ++rep) {
    CounterRng rng(derive_seed(600, rep));
    const Eigen::MatrixXd Z = gaussian_matrix(rng, n, q);
    Eigen::MatrixXd U(n, l);
    U.col(0) = Z * psi + 0.6 * gaussian_vector(rng, n);
    for (int k = 1; k < l; ++k)
      U.col(k) = cs[k - 1] * U.col(0) + 0.5 * gaussian_vector(rng, n);
    const Eigen::VectorXd Y = Z * theta + U * gamma + 0.3 * gaussian_vector(rng, n);

    InstrumentOptions io;
    io.d = 1;
    io.u_mode = UColumnMode::FirstD;
    const InstrumentPlan plan = build_instrument_plan(Z, U, alpha, Eigen::VectorXd(), io);

    Eigen::MatrixXd Vs = plan.V;
    for (Eigen::Index j = 0; j < Vs.cols(); ++j) {
      const double sd =
          std::sqrt((Vs.col(j).array() - Vs.col(j).mean()).square().sum() / (n - 1));
      if (sd > 0) Vs.col(j) /= sd;
    }
    KernelSpec ks;
    ks.dim = 2;
    ks.h = 0.1 * std::pow(static_cast<double>(n), -1.0 / 8.0);
    const Eigen::VectorXd g = estimate_g_many(theta, Z, Y, Vs, ks, Vs);
    const Eigen::VectorXd xi = Y - Z * theta - g;

    Eigen::MatrixXd regressors(n, q + 2);
    regressors.leftCols(q) = Z;
    regressors.rightCols(2) = Vs;
    const auto ols = hdlm_test::ols_slopes_with_se(regressors, xi);
    bool ok = true;
    for (Eigen::Index j = 0; j < ols.slope.size(); ++j)
      if (std::abs(ols.slope[j]) > 3.0 * ols.stderr_[j]) ok = false;
    if (ok) ++pass;
  }
  CHECK(pass == reps);  // measured 30/30 at this seed family
}

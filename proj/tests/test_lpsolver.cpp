#include <doctest.h>

#include <Eigen/Dense>

#include "hdlm/lpsolver.hpp"
#include "hdlm/rng.hpp"
#include "oracles.hpp"

using hdlm::LinearProgram;
using hdlm::LpStatus;
using hdlm::solve_lp;

namespace {

LinearProgram make_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                      const Eigen::VectorXd& b) {
  LinearProgram lp;
  lp.c = c;
  lp.A_ub = A;
  lp.b_ub = b;
  return lp;
}

// Random LP with a guaranteed interior point and a box row, so it is
// feasible and bounded.
LinearProgram random_bounded_lp(std::uint64_t seed, int max_vars = 6, int max_rows = 7) {
  hdlm::CounterRng rng(seed);
  const int nv = 1 + static_cast<int>(rng.next_u64() % max_vars);
  const int mr = 1 + static_cast<int>(rng.next_u64() % max_rows);
  Eigen::MatrixXd A(mr + 1, nv);
  Eigen::VectorXd b(mr + 1);
  Eigen::VectorXd w0(nv);
  for (int j = 0; j < nv; ++j) w0[j] = 2.0 * rng.next_uniform();
  for (int i = 0; i < mr; ++i) {
    for (int j = 0; j < nv; ++j) A(i, j) = rng.next_gaussian();
    b[i] = A.row(i).dot(w0) + 0.1 + rng.next_uniform();
  }
  A.row(mr).setOnes();
  b[mr] = w0.sum() + 1.0 + 5.0 * rng.next_uniform();
  Eigen::VectorXd c(nv);
  for (int j = 0; j < nv; ++j) c[j] = rng.next_gaussian();
  return make_lp(c, A, b);
}

}  // namespace

TEST_CASE("solve_lp handles the canonical small cases") {
  // min w1 + w2 s.t. w1 + w2 >= 1 (as -w1 - w2 <= -1), w >= 0.
  Eigen::MatrixXd A(1, 2);
  A << -1, -1;
  const auto sol = solve_lp(make_lp(Eigen::VectorXd::Ones(2), A, -Eigen::VectorXd::Ones(1)));
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-9));

  // 0*w <= -1 is empty.
  Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(1, 1);
  const auto inf = solve_lp(make_lp(Eigen::VectorXd::Ones(1), A0, -Eigen::VectorXd::Ones(1)));
  CHECK(inf.status == LpStatus::Infeasible);

  // min -w1 with only w >= 0 is unbounded.
  const auto unb = solve_lp(
      make_lp(-Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(0, 1), Eigen::VectorXd::Zero(0)));
  CHECK(unb.status == LpStatus::Unbounded);
}

TEST_CASE("solve_lp rejects inconsistent dimensions") {
  LinearProgram lp;
  lp.c = Eigen::VectorXd::Ones(2);
  lp.A_ub = Eigen::MatrixXd::Zero(1, 3);
  lp.b_ub = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(solve_lp(lp), std::invalid_argument);
}

TEST_CASE("solve_lp matches vertex enumeration on random bounded LPs") {
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const LinearProgram lp = random_bounded_lp(seed);
    const auto oracle = hdlm_test::lp_vertex_enumeration(lp.c, lp.A_ub, lp.b_ub);
    REQUIRE(oracle.has_value());
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(*oracle).epsilon(1e-8));
    // Feasibility of the reported point.
    CHECK(((lp.A_ub * sol.w - lp.b_ub).array() <= 1e-8).all());
    CHECK((sol.w.array() >= -1e-9).all());
    ++solved;
  }
  CHECK(solved == 150);
}

TEST_CASE("solve_lp duals certify the optimum") {
  for (std::uint64_t seed = 1000; seed < 1050; ++seed) {
    const LinearProgram lp = random_bounded_lp(seed);
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    // max b'y s.t. A'y <= c, y <= 0 attains the primal optimum.
    CHECK(lp.b_ub.dot(sol.dual) == doctest::Approx(sol.objective).epsilon(1e-8));
    CHECK(((lp.A_ub.transpose() * sol.dual).array() <= lp.c.array() + 1e-8).all());
    CHECK((sol.dual.array() <= 1e-9).all());
  }
}

TEST_CASE("solve_lp reports the iteration limit") {
  const LinearProgram lp = random_bounded_lp(7);
  const auto sol = solve_lp(lp, 1e-9, 1);
  CHECK(sol.status == LpStatus::IterLimit);
}

#include "hdlm/lpsolver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace hdlm {

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    default: return "IterLimit";
  }
}

void LinearProgram::validate() const {
  if (A_ub.cols() != c.size())
    throw std::invalid_argument("LinearProgram: cols(A_ub) must equal len(c)");
  if (A_ub.rows() != b_ub.size())
    throw std::invalid_argument("LinearProgram: rows(A_ub) must equal len(b_ub)");
  if (!nonneg)
    throw std::invalid_argument("LinearProgram: only the w >= 0 form is supported");
  if (!c.allFinite() || !A_ub.allFinite() || !b_ub.allFinite())
    throw std::invalid_argument("LinearProgram: non-finite entries");
}

namespace {

// Dense tableau state. Columns: [0,n) original vars, [n,n+m) slacks,
// [n+m,n+m+k) artificials. M holds the original (sign-flipped) equality
// system so the basis can be refactorized exactly.
struct Tableau {
  Eigen::MatrixXd M;           // m x ncols, immutable equality system
  Eigen::VectorXd b;           // m, immutable right-hand side (>= 0)
  Eigen::MatrixXd T;           // working tableau B^-1 M
  Eigen::VectorXd rhs;         // B^-1 b, kept >= 0
  Eigen::RowVectorXd red;      // reduced costs of the active phase
  Eigen::RowVectorXd cost;     // cost vector of the active phase
  double obj = 0.0;
  std::vector<int> basis;      // basic column per row
  int n = 0, m = 0, ncols = 0;
  int art_begin = 0;
  long iterations = 0;

  void pivot(int row, int col) {
    const double piv = T(row, col);
    T.row(row) /= piv;
    rhs[row] /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      const double f = T(i, col);
      if (f == 0.0) continue;
      T.row(i) -= f * T.row(row);
      rhs[i] -= f * rhs[row];
      T(i, col) = 0.0;
      if (rhs[i] < 0.0 && rhs[i] > -1e-11) rhs[i] = 0.0;
    }
    const double rf = red[col];
    if (rf != 0.0) {
      red -= rf * T.row(row);
      obj += rf * rhs[row];
      red[col] = 0.0;
    }
    basis[row] = col;
  }

  // Recompute T, rhs, red, obj from the original data and the current
  // basis. Clears the rounding drift the elimination accumulates and makes
  // the optimality test trustworthy.
  void refactorize() {
    if (m == 0) {
      recompute_costs();
      return;
    }
    Eigen::MatrixXd B(m, m);
    for (int i = 0; i < m; ++i) B.col(i) = M.col(basis[i]);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    T = lu.solve(M);
    rhs = lu.solve(b);
    for (int i = 0; i < m; ++i) {
      if (rhs[i] < 0.0 && rhs[i] > -1e-9) rhs[i] = 0.0;
      T(i, basis[i]) = 1.0;
    }
    recompute_costs();
  }

  void recompute_costs() {
    red = cost;
    obj = 0.0;
    for (int i = 0; i < m; ++i) {
      const double cb = cost[basis[i]];
      if (cb == 0.0) continue;
      red -= cb * T.row(i);
      obj += cb * rhs[i];
    }
    for (int i = 0; i < m; ++i) red[basis[i]] = 0.0;
  }
};

// One phase of the simplex loop. allow_art widens the entering set to the
// artificial columns (phase 1 only).
LpStatus run_phase(Tableau& tb, double tol, long max_iter, bool allow_art) {
  const int limit_col = allow_art ? tb.ncols : tb.art_begin;
  bool bland = false;
  int stall = 0;
  const int stall_limit = 2 * (tb.m + tb.ncols) + 16;

  while (true) {
    if (tb.iterations >= max_iter) return LpStatus::IterLimit;

    int enter = -1;
    if (bland) {
      for (int j = 0; j < limit_col; ++j) {
        if (tb.red[j] < -tol) { enter = j; break; }
      }
    } else {
      double best = -tol;
      for (int j = 0; j < limit_col; ++j) {
        if (tb.red[j] < best) { best = tb.red[j]; enter = j; }
      }
    }
    if (enter < 0) return LpStatus::Optimal;

    // Pivot candidates must be solid relative to the column scale, or a
    // rounding-noise entry divides the tableau and the iteration derails.
    const double col_max = tb.m > 0 ? tb.T.col(enter).cwiseAbs().maxCoeff() : 0.0;
    const double piv_tol = std::max(1e-10, 1e-7 * col_max);

    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < tb.m; ++i) {
      const double a = tb.T(i, enter);
      if (a <= piv_tol) continue;
      const double ratio = tb.rhs[i] / a;
      if (ratio < best_ratio - 1e-12 ||
          (ratio < best_ratio + 1e-12 && (leave < 0 || tb.basis[i] < tb.basis[leave]))) {
        best_ratio = ratio;
        leave = i;
      }
    }
    if (leave < 0) return LpStatus::Unbounded;

    const double obj_before = tb.obj;
    tb.pivot(leave, enter);
    ++tb.iterations;

    if (obj_before - tb.obj > tol * (1.0 + std::abs(obj_before))) {
      stall = 0;
      bland = false;
    } else if (++stall > stall_limit) {
      bland = true;
    }
  }
}

// Iterate run_phase with refactorization until the optimality claim
// survives a clean recomputation of the reduced costs.
LpStatus run_phase_verified(Tableau& tb, double tol, long max_iter, bool allow_art) {
  const int limit_col = allow_art ? tb.ncols : tb.art_begin;
  for (int round = 0; round < 40; ++round) {
    const LpStatus st = run_phase(tb, tol, max_iter, allow_art);
    if (st != LpStatus::Optimal) return st;
    tb.refactorize();
    double worst = 0.0;
    for (int j = 0; j < limit_col; ++j) worst = std::min(worst, tb.red[j]);
    if (worst >= -10.0 * tol) return LpStatus::Optimal;
  }
  return LpStatus::IterLimit;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, double tol, long max_iter) {
  lp.validate();
  if (!(tol > 0)) throw std::invalid_argument("solve_lp: tol must be positive");

  const int n = static_cast<int>(lp.c.size());
  const int m = static_cast<int>(lp.b_ub.size());
  if (max_iter < 0) max_iter = 50L * (n + m);

  // Rows with negative rhs are negated so the slack basis stays primal
  // feasible; those rows get an artificial variable.
  std::vector<int> art_rows;
  for (int i = 0; i < m; ++i)
    if (lp.b_ub[i] < 0.0) art_rows.push_back(i);
  const int k = static_cast<int>(art_rows.size());

  Tableau tb;
  tb.n = n;
  tb.m = m;
  tb.ncols = n + m + k;
  tb.art_begin = n + m;
  tb.M = Eigen::MatrixXd::Zero(m, tb.ncols);
  tb.b = Eigen::VectorXd::Zero(m);
  tb.basis.assign(m, -1);

  for (int i = 0; i < m; ++i) {
    const double s = lp.b_ub[i] < 0.0 ? -1.0 : 1.0;
    tb.M.row(i).head(n) = s * lp.A_ub.row(i);
    tb.M(i, n + i) = s;
    tb.b[i] = s * lp.b_ub[i];
    tb.basis[i] = n + i;
  }
  for (int a = 0; a < k; ++a) {
    const int i = art_rows[a];
    tb.M(i, tb.art_begin + a) = 1.0;
    tb.basis[i] = tb.art_begin + a;
  }
  tb.T = tb.M;
  tb.rhs = tb.b;

  LpSolution sol;

  // Phase 1: minimize the sum of artificials.
  if (k > 0) {
    tb.cost = Eigen::RowVectorXd::Zero(tb.ncols);
    tb.cost.tail(k).setOnes();
    tb.recompute_costs();

    const LpStatus st = run_phase_verified(tb, tol, max_iter, true);
    sol.iterations = tb.iterations;
    if (st == LpStatus::IterLimit) {
      sol.status = LpStatus::IterLimit;
      return sol;
    }
    const double feas_gap = std::max(tb.obj, 0.0);
    if (feas_gap > 1e-7 * std::max(1.0, lp.b_ub.lpNorm<Eigen::Infinity>())) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // Drive remaining artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
      if (tb.basis[i] < tb.art_begin) continue;
      int col = -1;
      for (int j = 0; j < tb.art_begin; ++j) {
        if (std::abs(tb.T(i, j)) > 1e-8) { col = j; break; }
      }
      if (col >= 0) tb.pivot(i, col);
      // else: redundant row; the artificial stays basic at value zero.
    }
  }

  // Phase 2 on the real objective.
  tb.cost = Eigen::RowVectorXd::Zero(tb.ncols);
  tb.cost.head(n) = lp.c.transpose();
  tb.refactorize();

  const LpStatus st = run_phase_verified(tb, tol, max_iter, false);
  sol.iterations = tb.iterations;
  sol.status = st;
  if (st != LpStatus::Optimal) return sol;

  sol.w = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (tb.basis[i] < n) sol.w[tb.basis[i]] = std::max(0.0, tb.rhs[i]);
  sol.objective = tb.obj;
  sol.dual = Eigen::VectorXd(m);
  for (int i = 0; i < m; ++i) sol.dual[i] = -tb.red[n + i];
  return sol;
}

}  // namespace hdlm

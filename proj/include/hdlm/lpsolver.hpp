#pragma once

#include <Eigen/Core>

namespace hdlm {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

const char* to_string(LpStatus s);

// min c'w  subject to  A_ub w <= b_ub,  w >= 0.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd A_ub;
  Eigen::VectorXd b_ub;
  bool nonneg = true;

  void validate() const;
};

struct LpSolution {
  Eigen::VectorXd w;
  double objective = 0.0;
  LpStatus status = LpStatus::IterLimit;
  // Multipliers y for the inequality rows (y <= 0 at an optimum of the
  // minimization; strong duality gives b_ub' y == objective).
  Eigen::VectorXd dual;
  long iterations = 0;
};

// Two-phase dense tableau simplex. Entering variable: most negative
// reduced cost; after a long degenerate stall the rule switches to
// Bland's (lowest index) until the objective moves again, which
// guarantees termination. Ratio-test ties always go to the row whose
// basic variable has the lowest index.
//
// max_iter < 0 selects the default 50 * (vars + constraints).
LpSolution solve_lp(const LinearProgram& lp, double tol = 1e-9, long max_iter = -1);

}  // namespace hdlm

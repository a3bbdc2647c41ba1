#pragma once

#include <Eigen/Dense>

#include <vector>

namespace reinsqp {

struct NonnegQpResult {
  Eigen::VectorXd plus;     // F+: argmin_{y >= 0} y.m y / 2 - x.y
  Eigen::VectorXd minus;    // F-: m F+ - x, the bound multipliers
  std::vector<bool> passive;  // components allowed to be nonzero at the solution
  int pivots = 0;
};

/// Primal active-set solve with the lowest-index entering rule. Components
/// flagged in `free_mask` are unconstrained (their F- entry is zero).
/// F+ and F- are exactly complementary. Throws NotSpd or MaxPivotsExceeded.
NonnegQpResult nonneg_qp(const Eigen::MatrixXd& m, const Eigen::VectorXd& x, const std::vector<bool>& free_mask = {},
                         double tol_pd = 1e-9);

/// Re-solve on a fixed passive set: y_P = m_PP^{-1} x_P, zero elsewhere.
Eigen::VectorXd solve_on_passive_set(const Eigen::MatrixXd& m, const Eigen::VectorXd& x,
                                     const std::vector<bool>& passive);

}  // namespace reinsqp

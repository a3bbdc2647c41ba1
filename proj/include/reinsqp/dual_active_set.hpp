#pragma once

#include <Eigen/Dense>

#include <vector>

namespace reinsqp {

/// min 1/2 x^T G x + g0^T x  s.t.  a_eq x = b_eq,  a_in x >= b_in.
struct DenseQp {
  Eigen::MatrixXd g;
  Eigen::VectorXd g0;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd a_in;
  Eigen::VectorXd b_in;
};

enum class QpStatus { Optimal, Infeasible };

struct QpSolution {
  QpStatus status = QpStatus::Infeasible;
  Eigen::VectorXd x;
  Eigen::VectorXd y_eq;          // free multipliers of the equalities
  Eigen::VectorXd y_in;          // nonnegative multipliers of the inequalities
  std::vector<int> active_in;    // inequality rows active at the solution
  double objective = 0.0;
  int iterations = 0;
};

/// Goldfarb-Idnani dual active-set method; G must be positive definite.
/// The multipliers satisfy G x + g0 = a_eq^T y_eq + a_in^T y_in.
/// Reports Infeasible when the dual becomes unbounded; throws NotSpd or
/// MaxPivotsExceeded.
QpSolution solve_dense_qp(const DenseQp& qp);

}  // namespace reinsqp

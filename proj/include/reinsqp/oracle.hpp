#pragma once

#include "reinsqp/contracts.hpp"
#include "reinsqp/multiplier_set.hpp"
#include "reinsqp/operators.hpp"
#include "reinsqp/portfolio.hpp"
#include "reinsqp/scenario_tree.hpp"

#include <vector>

namespace reinsqp {

/// Leaf design matrix: Phi(omega, (k, v, i)) = 1{anc_k(omega) = v} u^inf_i(k)(omega),
/// so that U(inf, eta) = Phi coords(eta) on the leaves.
Eigen::MatrixXd leaf_design(const ScenarioTree& tree, const ContractBook& book, int max_dim = kDenseMaxDim);

/// Raw Gram matrix of a (kind A) or b (kind B) built from the leaf design.
Eigen::MatrixXd dense_gram(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                           int max_dim = kDenseMaxDim);

/// Brute-force realization of one problem in R^D.
struct DenseProblem {
  OperatorKind kind = OperatorKind::B;
  Eigen::MatrixXd gram;     // form(eta, eta') = coords^T gram coords'
  Eigen::VectorXd weights;  // path probability of each coordinate's node
  Eigen::MatrixXd rows;     // row t: coefficients of (l_t, eta)_H; last row: E(U(inf))
  Eigen::VectorXd levels;   // e_t

  int dim() const { return static_cast<int>(gram.rows()); }
};

DenseProblem build_dense_problem(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                 const ConstraintConfig& config, int max_dim = kDenseMaxDim);

/// Coordinates of eta with (C - lambda) eta = xi, by LU on G - lambda W.
Eigen::VectorXd dense_solve_linear(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                   const Eigen::VectorXd& xi_coords, double lambda = 0.0,
                                   int max_dim = kDenseMaxDim);

/// Sorted eigenvalues of the operator C (W^{-1/2} G W^{-1/2}).
std::vector<double> dense_spectrum(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                   int max_dim = kDenseMaxDim);

struct OracleResult {
  ProblemForm form = ProblemForm::MinVariance;
  PortfolioProcess eta;
  MultiplierSet multipliers;
  double mean = 0.0;
  double variance = 0.0;
  double second_moment = 0.0;
  double e_used = 0.0;          // mean level of the final inner solve
  double stationarity = 0.0;    // Euclidean residual in weighted coordinates
  double complementarity = 0.0;
  double infeasibility = 0.0;
  int qp_iterations = 0;
  int bisection_steps = 0;
};

/// Solves one of the three problem forms with the dense dual active-set
/// engine. Throws Infeasible when the constraint set is empty.
OracleResult dense_qp(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                      ProblemForm form, int max_dim = kDenseMaxDim);

}  // namespace reinsqp

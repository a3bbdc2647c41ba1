#pragma once

#include "reinsqp/contracts.hpp"
#include "reinsqp/operators.hpp"
#include "reinsqp/scenario_tree.hpp"

#include <vector>

namespace reinsqp {

inline constexpr double kCondMax = 1e12;
inline constexpr double kSolveResidualTol = 1e-9;

/// Coefficients of the block elimination of (C - lambda) eta = xi, n = 0..T_bar.
/// f_n, g_n are the values entering level n (f_{T_bar} = 1, g_{T_bar} = 0);
/// f_final, g_final are f_{-1}, g_{-1}.
struct EliminationCoefficients {
  double lambda = 0.0;
  std::vector<double> d;
  std::vector<double> f;
  std::vector<double> g;
  double f_final = 1.0;
  double g_final = 0.0;
  std::vector<std::vector<Eigen::MatrixXd>> D;  // D[n][k], 0 <= k <= n
  std::vector<Eigen::VectorXd> mean_u;

  int t_bar() const { return static_cast<int>(d.size()) - 1; }
  /// D_n(k) - (1 - g_n) m_k m_k^T: the pivot acting on means for kind B.
  Eigen::MatrixXd mean_pivot(int n, int k) const;
};

/// Throws SingularPivot when D_n(n) has 2-norm condition above cond_max.
EliminationCoefficients elimination_coefficients(const MomentTables& moments, double lambda,
                                                 double cond_max = kCondMax);

struct SpectralSets {
  std::vector<double> sigma_a;                    // sorted union over levels
  std::vector<double> sigma_b;                    // sigma_a plus the mean-pivot spectra
  std::vector<std::vector<double>> levels_a;      // spectrum of the level-n a-matrix
  std::vector<std::vector<double>> levels_b;      // spectrum of the level-n b-matrix
  double lambda = 0.0;                            // shift at which the recursion was evaluated
};

/// Level matrices M^a(n) - sum_{r>n} d_r f_r^2 N^a_r(n) and their b analogues,
/// with d, f evaluated at `lambda`.
SpectralSets spectral_sets(const MomentTables& moments, double lambda = 0.0, double cond_max = kCondMax);

/// Distance from `lambda_star` to the sigma set of `kind`, the set of lambda with
/// lambda in the spectrum of some level matrix evaluated at lambda itself. Found by
/// bracketing sign changes of the eigenvalue branches; an upper bound within a
/// factor of two. Zero when a pivot is singular at lambda_star.
double sigma_distance(OperatorKind kind, const MomentTables& moments, double lambda_star,
                      double cond_max = kCondMax);

/// (C^n(k,k))^{-1} x for x adapted at depth k <= n.
AdaptedVariable diag_block_inverse(OperatorKind kind, const ScenarioTree& tree, const EliminationCoefficients& coeffs,
                                   int n, const AdaptedVariable& x, double cond_max = kCondMax);

PortfolioProcess forward_eliminate(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                   const EliminationCoefficients& coeffs, const PortfolioProcess& xi);

PortfolioProcess back_substitute(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                 const EliminationCoefficients& coeffs, const PortfolioProcess& xi0);

struct SolveResult {
  PortfolioProcess eta;
  double residual = 0.0;  // ||(C - lambda) eta - xi||_H / ||xi||_H
  bool ok = false;        // residual <= kSolveResidualTol
};

class StructuredSolver {
 public:
  /// Throws SingularPivot if the elimination breaks down at `lambda`.
  StructuredSolver(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, double lambda = 0.0,
                   double cond_max = kCondMax);

  SolveResult solve(const PortfolioProcess& xi) const;
  const EliminationCoefficients& coefficients() const { return coeffs_; }
  OperatorKind kind() const { return kind_; }

 private:
  OperatorKind kind_;
  const ScenarioTree& tree_;
  const ContractBook& book_;
  EliminationCoefficients coeffs_;
};

SolveResult solve(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& xi,
                  double lambda = 0.0);

}  // namespace reinsqp

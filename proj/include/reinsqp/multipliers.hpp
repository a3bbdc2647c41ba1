#pragma once

#include "reinsqp/contracts.hpp"
#include "reinsqp/multiplier_set.hpp"
#include "reinsqp/nonneg_qp.hpp"
#include "reinsqp/operators.hpp"
#include "reinsqp/portfolio.hpp"
#include "reinsqp/scenario_tree.hpp"
#include "reinsqp/solver_c.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace reinsqp {

inline constexpr double kTolKkt = 1e-8;

/// Problem forms solved with B (variance) use kind B; the fixed-mean form uses A.
OperatorKind operator_for(ProblemForm form);

/// C^{-1} at shift 0: the structured elimination when it is well posed,
/// otherwise a dense LU solve (recorded in dense_fallback()).
class CInverse {
 public:
  CInverse(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, int max_dim = kDenseMaxDim);

  PortfolioProcess solve(const PortfolioProcess& xi) const;

  OperatorKind kind() const { return kind_; }
  bool dense_fallback() const { return dense_fallback_; }
  /// Largest relative residual seen from the structured path.
  double worst_residual() const { return worst_residual_; }

 private:
  PortfolioProcess dense_solve(const PortfolioProcess& xi) const;

  OperatorKind kind_;
  const ScenarioTree& tree_;
  const ContractBook& book_;
  int max_dim_;
  std::unique_ptr<StructuredSolver> structured_;
  mutable bool dense_fallback_ = false;
  mutable double worst_residual_ = 0.0;
};

/// Gram matrix of the constraint representers under C^{-1}:
/// l_inv(t, s) = (l_t, C^{-1} l_s), index T_bar+T standing for m.
struct LGram {
  Eigen::MatrixXd l_inv;
  std::vector<PortfolioProcess> rows;          // l_0..l_{T_bar+T-1}, m
  std::vector<PortfolioProcess> c_inv_rows;    // C^{-1} applied to each row
  double condition = 1.0;
  bool near_singular = false;

  /// r(nu)_t = (l_t, C^{-1} nu).
  Eigen::VectorXd r(const ScenarioTree& tree, const CInverse& cinv, const PortfolioProcess& nu) const;
};

LGram l_gram(const ScenarioTree& tree, const CInverse& cinv, const Representers& reps, double cond_max = kCondMax);

/// lambda = F+_{l_inv}(q) (equivalently F-_L(-L q)); proximal-point iterations
/// on l_inv + eps I when l_inv is near singular.
Eigen::VectorXd multiplier_lcp(const Eigen::MatrixXd& l_inv, const Eigen::VectorXd& q,
                               const std::vector<bool>& free_mask, bool near_singular);

struct DeterministicSolution {
  PortfolioProcess eta;
  MultiplierSet multipliers;
  Eigen::MatrixXd gram;   // restricted form on R^{(T_bar+1)N}
  Eigen::MatrixXd rows;   // l^D_t stacked, last row the mean
  bool feasible = false;
  double complementarity = 0.0;
};

/// Exact minimizer over F_0-measurable portfolios. Reports feasible = false
/// (zero solution and multipliers) when that restricted set is empty.
DeterministicSolution deterministic_solution(const ScenarioTree& tree, const ContractBook& book,
                                             const ConstraintConfig& config, ProblemForm form);

struct KktReport {
  double stationarity_abs = 0.0;
  double stationarity = 0.0;      // abs / max(1, ||C eta||_H)
  double sign_violation = 0.0;    // negative parts of lambda, mu (unless free), nu, eta
  double complementarity = 0.0;   // max |lambda_t slack_t|, |mu slack|, p_v |nu_i eta_i|
  double infeasibility = 0.0;     // constraint violation
  double tol = kTolKkt;
  bool converged = false;

  double max_residual() const;
};

KktReport kkt_verify(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                     const PortfolioProcess& eta, const MultiplierSet& mult, ProblemForm form,
                     double tol_kkt = kTolKkt);

/// Shared data for the approximation cycle.
class MultiplierContext {
 public:
  MultiplierContext(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                    ProblemForm form, int max_dim = kDenseMaxDim);

  const ScenarioTree& tree() const { return tree_; }
  const ContractBook& book() const { return book_; }
  const ConstraintConfig& config() const { return config_; }
  ProblemForm form() const { return form_; }
  OperatorKind kind() const { return cinv_.kind(); }
  const MomentTables& moments() const { return moments_; }
  const Representers& representers() const { return reps_; }
  const CInverse& c_inverse() const { return cinv_; }
  const LGram& gram() const { return gram_; }
  Eigen::VectorXd levels() const { return constraint_levels(config_); }
  std::vector<bool> free_mask() const;

 private:
  const ScenarioTree& tree_;
  const ContractBook& book_;
  ConstraintConfig config_;
  ProblemForm form_;
  MomentTables moments_;
  Representers reps_;
  CInverse cinv_;
  LGram gram_;
};

/// Theta^{sign}(k): nodewise F^{sign}_{M^a(k)} of
/// sum_t lambda_t l_t(k) + [(M^a - M^b) E eta(k) for B] - sum_{l != k} C(k,l) eta(l).
AdaptedVariable theta(const MultiplierContext& ctx, int k, int sign, const Eigen::VectorXd& stacked_lambda,
                      const PortfolioProcess& eta);

struct Approximation {
  Eigen::VectorXd lambda;     // stacked, mu last
  PortfolioProcess eta_bar;   // C^{-1}(sum lambda_t l_t + nu_prev)
  PortfolioProcess nu;
  PortfolioProcess eta_hat;

  MultiplierSet multipliers() const { return MultiplierSet::from_stacked(lambda, nu); }
};

/// One approximation cycle driven by the previous nu (nu^D for the first).
Approximation approximation_step(const MultiplierContext& ctx, const PortfolioProcess& nu_prev);

Approximation first_approximation(const MultiplierContext& ctx, const DeterministicSolution& det);

/// eta = C^{-1}(mu m + sum lambda_t l_t + nu).
PortfolioProcess assemble_solution(const MultiplierContext& ctx, const MultiplierSet& mult);

struct IterationResult {
  Approximation last;
  KktReport kkt;
  std::vector<double> history;   // residual after the first approximation, then per cycle
  int iterations = 0;            // cycles beyond the first approximation
  bool converged = false;
  bool non_monotone = false;     // some cycle increased the residual
  bool diverging = false;        // three consecutive increases, three new highs without a new
                                 // best, or overflow (last finite iterate kept); stopped early
};

IterationResult iterate(const MultiplierContext& ctx, const Approximation& first, int max_iter,
                        double tol_kkt = kTolKkt);

}  // namespace reinsqp

#pragma once

#include "reinsqp/contracts.hpp"
#include "reinsqp/scenario_tree.hpp"

#include <optional>
#include <vector>

namespace reinsqp {

inline constexpr double kTolFeas = 1e-8;

struct ConstraintConfig {
  std::vector<double> c;          // profitability rate c(t), t = 0..T_bar+T-1
  double e = 0.0;                 // floor on the expected final utility
  std::optional<double> sigma2;   // variance cap for the max-mean form
  double k0 = 0.0;                // initial equity K(0)
};

/// Throws InputError if lengths or signs are inconsistent with the tree.
void validate_config(const ScenarioTree& tree, const ConstraintConfig& config);

/// Right-hand sides of the linear constraints (l_t, eta) >= e_t: c(t) K0 for
/// t < T_bar+T and e for the final index (the mean functional).
Eigen::VectorXd constraint_levels(const ConstraintConfig& config);

struct ConstraintReport {
  std::vector<double> roe_slack;   // E(dU(t+1)) - c(t)(K0 + E U(t))
  double mean_value = 0.0;         // E(U(inf))
  double mean_slack = 0.0;         // E(U(inf)) - e
  double variance = 0.0;           // b(eta)
  std::optional<double> variance_slack;  // sigma2 - b(eta)
  double min_eta = 0.0;
  bool feasible_c0 = false;        // C3, C4, C6 (requires sigma2)
  bool feasible_c1 = false;        // C3', C4' (>=), C6'
  bool feasible_c2 = false;        // C3'', C4'' (=), C6''
};

/// U(t, eta) on the depth-t layer (scalar).
AdaptedVariable utility(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta, int t);
AdaptedVariable final_utility_rv(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta);
/// U(t+1, eta) - U(t, eta), on the depth-(t+1) layer.
AdaptedVariable delta_utility(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta, int t);

double mean_functional(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta);
/// a(eta) = E(U(inf)^2).
double second_moment_a(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta);
/// b(eta) = Var(U(inf)).
double variance_b(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta);

ConstraintReport evaluate_constraints(const ScenarioTree& tree, const ContractBook& book,
                                      const PortfolioProcess& eta, const ConstraintConfig& config,
                                      double tol_feas = kTolFeas);

}  // namespace reinsqp

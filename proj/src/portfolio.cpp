#include "reinsqp/portfolio.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace reinsqp {

void validate_config(const ScenarioTree& tree, const ConstraintConfig& config) {
  if (static_cast<int>(config.c.size()) != tree.horizon()) {
    throw InputError("constraints.c has " + std::to_string(config.c.size()) + " entries, expected T_bar+T = " +
                     std::to_string(tree.horizon()));
  }
  for (double ct : config.c) {
    if (!(ct >= 0.0) || !std::isfinite(ct)) throw InputError("profitability rates c(t) must be finite and >= 0");
  }
  if (!(config.e >= 0.0) || !std::isfinite(config.e)) throw InputError("e must be finite and >= 0");
  if (!(config.k0 >= 0.0) || !std::isfinite(config.k0)) throw InputError("K0 must be finite and >= 0");
  if (config.sigma2 && !(*config.sigma2 > 0.0)) throw InputError("sigma2 must be > 0 when present");
}

Eigen::VectorXd constraint_levels(const ConstraintConfig& config) {
  const auto horizon = static_cast<Eigen::Index>(config.c.size());
  Eigen::VectorXd levels(horizon + 1);
  for (Eigen::Index t = 0; t < horizon; ++t) levels[t] = config.c[static_cast<std::size_t>(t)] * config.k0;
  levels[horizon] = config.e;
  return levels;
}

AdaptedVariable utility(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta, int t) {
  check_portfolio(tree, eta);
  if (t < 0 || t > tree.horizon()) throw InputError("utility time " + std::to_string(t) + " out of range");
  AdaptedVariable total = AdaptedVariable::zeros(tree, t, 1);
  for (int k = 0; k <= std::min(t - 1, tree.t_bar()); ++k) {
    total += row_dot(lift(tree, eta.stage(k), t), book.utility(k, t));
  }
  return total;
}

AdaptedVariable final_utility_rv(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta) {
  return utility(tree, book, eta, tree.horizon());
}

AdaptedVariable delta_utility(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta,
                              int t) {
  if (t < 0 || t >= tree.horizon()) throw InputError("delta_utility time " + std::to_string(t) + " out of range");
  return utility(tree, book, eta, t + 1) - lift(tree, utility(tree, book, eta, t), t + 1);
}

double mean_functional(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta) {
  return expectation_scalar(tree, final_utility_rv(tree, book, eta));
}

double second_moment_a(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta) {
  const auto u = final_utility_rv(tree, book, eta);
  return u.values().col(0).cwiseAbs2().dot(tree.layer_probabilities(u.depth()));
}

double variance_b(const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& eta) {
  const auto u = final_utility_rv(tree, book, eta);
  const Eigen::VectorXd p = tree.layer_probabilities(u.depth());
  const double mean = u.values().col(0).dot(p);
  return (u.values().col(0).array() - mean).square().matrix().dot(p);
}

ConstraintReport evaluate_constraints(const ScenarioTree& tree, const ContractBook& book,
                                      const PortfolioProcess& eta, const ConstraintConfig& config,
                                      double tol_feas) {
  validate_config(tree, config);
  ConstraintReport r;
  bool roe_ok = true;
  for (int t = 0; t < tree.horizon(); ++t) {
    const double gain = expectation_scalar(tree, delta_utility(tree, book, eta, t));
    const double equity = config.k0 + expectation_scalar(tree, utility(tree, book, eta, t));
    const double slack = gain - config.c[static_cast<std::size_t>(t)] * equity;
    r.roe_slack.push_back(slack);
    roe_ok = roe_ok && slack >= -tol_feas;
  }
  r.mean_value = mean_functional(tree, book, eta);
  r.mean_slack = r.mean_value - config.e;
  r.variance = variance_b(tree, book, eta);
  r.min_eta = eta.min_value();
  const bool sign_ok = r.min_eta >= -tol_feas;
  r.feasible_c1 = roe_ok && sign_ok && r.mean_slack >= -tol_feas;
  r.feasible_c2 = roe_ok && sign_ok && std::abs(r.mean_slack) <= tol_feas;
  if (config.sigma2) {
    r.variance_slack = *config.sigma2 - r.variance;
    r.feasible_c0 = roe_ok && sign_ok && *r.variance_slack >= -tol_feas;
  }
  return r;
}

}  // namespace reinsqp

#pragma once

#include "reinsqp/scenario_tree.hpp"

#include <Eigen/Dense>

#include <string_view>

namespace reinsqp {

/// Lagrange multipliers: lambda_t for the profitability constraints,
/// mu for the mean constraint and nu >= 0 for the sign constraints.
struct MultiplierSet {
  Eigen::VectorXd lambda;
  double mu = 0.0;
  PortfolioProcess nu;

  /// lambda_0..lambda_{T_bar+T-1} followed by mu.
  Eigen::VectorXd stacked() const;
  static MultiplierSet from_stacked(const Eigen::VectorXd& all, PortfolioProcess nu);
};

enum class ProblemForm { MinVariance, FixedMean, MaxMean };

std::string_view to_string(ProblemForm form);
/// Accepts "min-variance", "fixed-mean", "max-mean"; throws InputError otherwise.
ProblemForm parse_form(std::string_view text);

}  // namespace reinsqp

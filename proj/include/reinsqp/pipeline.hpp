#pragma once

#include "reinsqp/contracts.hpp"
#include "reinsqp/multipliers.hpp"
#include "reinsqp/portfolio.hpp"
#include "reinsqp/scenario_tree.hpp"

#include <string>
#include <vector>

namespace reinsqp {

struct SolveOptions {
  ProblemForm form = ProblemForm::MinVariance;
  double tol_kkt = kTolKkt;
  int max_iter = 500;
  bool dense_fallback = true;
  int max_dim = kDenseMaxDim;
};

struct PipelineResult {
  ProblemForm form = ProblemForm::MinVariance;
  std::string source;                 // "structured" or "dense"
  PortfolioProcess eta;
  MultiplierSet multipliers;
  KktReport kkt;                      // of the returned (eta, multipliers)
  ConstraintReport constraints;
  double e_used = 0.0;
  double mean = 0.0;
  double variance = 0.0;

  // Structured-path diagnostics.
  KktReport structured_kkt;
  std::vector<double> history;
  int iterations = 0;
  bool structured_converged = false;
  bool non_monotone = false;
  bool diverging = false;
  bool near_singular_l = false;
  bool deterministic_feasible = false;
  int mean_search_steps = 0;
  std::vector<std::string> fallbacks;
};

/// Deterministic zeroth approximation, first approximation, then the
/// approximation cycle; if that does not reach tol_kkt the dense QP is used
/// (and recorded in `fallbacks`). The max-mean form searches the mean level
/// whose least variance equals sigma2. Throws Infeasible / NumericalError.
PipelineResult solve_pipeline(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                              const SolveOptions& options = {});

}  // namespace reinsqp

#include "reinsqp/pipeline.hpp"

#include "mean_search.hpp"
#include "reinsqp/errors.hpp"
#include "reinsqp/oracle.hpp"

#include <algorithm>
#include <optional>

namespace reinsqp {

namespace {

void add_flag(std::vector<std::string>& flags, const std::string& flag) {
  if (std::find(flags.begin(), flags.end(), flag) == flags.end()) flags.push_back(flag);
}

/// One solve at the mean level in `config` for a form solved directly.
PipelineResult solve_at_level(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                              ProblemForm form, const SolveOptions& options) {
  PipelineResult res;
  res.form = form;
  res.e_used = config.e;

  const DeterministicSolution det = deterministic_solution(tree, book, config, form);
  res.deterministic_feasible = det.feasible;
  if (!det.feasible) add_flag(res.fallbacks, "deterministic-infeasible");

  const MultiplierContext ctx(tree, book, config, form, options.max_dim);
  res.near_singular_l = ctx.gram().near_singular;
  if (res.near_singular_l) add_flag(res.fallbacks, "near-singular-l");

  IterationResult it;
  try {
    it = iterate(ctx, first_approximation(ctx, det), options.max_iter, options.tol_kkt);
  } catch (const NumericalError&) {
    if (!options.dense_fallback) throw;
    add_flag(res.fallbacks, "structured-error");
  }
  if (ctx.c_inverse().dense_fallback()) add_flag(res.fallbacks, "dense-c-inverse");
  res.structured_kkt = it.kkt;
  res.history = it.history;
  res.iterations = it.iterations;
  res.structured_converged = it.converged;
  res.non_monotone = it.non_monotone;
  res.diverging = it.diverging;

  if (it.converged || !options.dense_fallback) {
    res.source = "structured";
    res.eta = it.last.eta_hat;
    res.multipliers = it.last.multipliers();
    res.kkt = it.kkt;
  } else {
    add_flag(res.fallbacks, "dense-qp");
    const OracleResult o = dense_qp(tree, book, config, form, options.max_dim);
    res.source = "dense";
    res.eta = o.eta;
    res.multipliers = o.multipliers;
    res.kkt = kkt_verify(tree, book, config, res.eta, res.multipliers, form, options.tol_kkt);
  }
  res.constraints = evaluate_constraints(tree, book, res.eta, config);
  res.mean = res.constraints.mean_value;
  res.variance = res.constraints.variance;
  return res;
}

}  // namespace

PipelineResult solve_pipeline(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                              const SolveOptions& options) {
  validate_config(tree, config);
  if (options.form != ProblemForm::MaxMean) return solve_at_level(tree, book, config, options.form, options);

  if (!config.sigma2) throw InputError("max-mean form requires sigma2");
  const double sigma2 = *config.sigma2;
  auto at = [&](double e) {
    ConstraintConfig c = config;
    c.e = e;
    return solve_at_level(tree, book, c, ProblemForm::MinVariance, options);
  };
  auto variance = [&](double e) -> std::optional<double> {
    try {
      return at(e).variance;
    } catch (const Infeasible&) {
      return std::nullopt;
    }
  };
  const PipelineResult least = at(0.0);
  const detail::MeanSearch found = detail::search_mean_level(sigma2, std::max(0.0, least.mean), variance);
  ConstraintConfig final_config = config;
  final_config.e = found.e;
  PipelineResult res = solve_at_level(tree, book, final_config, ProblemForm::MinVariance, options);
  res.form = ProblemForm::MaxMean;
  res.mean_search_steps = found.steps;
  res.constraints = evaluate_constraints(tree, book, res.eta, final_config);
  return res;
}

}  // namespace reinsqp

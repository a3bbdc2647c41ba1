#pragma once

#include "reinsqp/contracts.hpp"
#include "reinsqp/multipliers.hpp"
#include "reinsqp/oracle.hpp"
#include "reinsqp/pipeline.hpp"
#include "reinsqp/portfolio.hpp"
#include "reinsqp/scenario_tree.hpp"
#include "reinsqp/solver_c.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace reinsqp::report {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";

Json validation(const ValidationReport& rep);
Json hypotheses(const HypothesisReport& rep);
Json constraints(const ConstraintReport& rep);
Json kkt(const KktReport& rep);
/// One entry per (stage, node): {"stage", "node", "prob", "eta": [...]}.
Json portfolio(const ScenarioTree& tree, const PortfolioProcess& eta);
Json multipliers(const ScenarioTree& tree, const MultiplierSet& mult);

Json validate_report(const ScenarioTree& tree, const HypothesisReport& hyp, double representer_error);
Json solve_report(const ScenarioTree& tree, const PipelineResult& res);
Json oracle_report(const ScenarioTree& tree, const OracleResult& res, const KktReport& kkt,
                   const ConstraintReport& cons);
Json spectrum_report(const SpectralSets& sets, const std::vector<double>& dense_a,
                     const std::vector<double>& dense_b, double containment_a, double containment_b);

struct Comparison {
  double eta_rel_deviation = 0.0;
  double mean_rel_deviation = 0.0;
  double variance_rel_deviation = 0.0;
  double max_rel_deviation = 0.0;
};

Comparison compare(const ScenarioTree& tree, const PipelineResult& solved, const OracleResult& oracle);
Json compare_report(const ScenarioTree& tree, const PipelineResult& solved, const OracleResult& oracle,
                    const Comparison& cmp);

/// Distance from each value to the nearest point of `set`; the maximum over `values`.
double max_set_distance(const std::vector<double>& values, const std::vector<double>& set);

/// Error report emitted on failure: {"status": "...", "error": "..."}.
Json error_report(const std::string& status, const std::string& message);

}  // namespace reinsqp::report

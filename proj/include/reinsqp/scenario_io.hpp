#pragma once

#include "reinsqp/contracts.hpp"
#include "reinsqp/portfolio.hpp"
#include "reinsqp/scenario_tree.hpp"

#include "json.hpp"

#include <memory>
#include <string>
#include <vector>

namespace reinsqp {

/// Raw contents of a scenario file.
struct Scenario {
  TreeSpec tree;
  std::vector<UtilityEntry> utilities;
  ConstraintConfig constraints;
};

/// Throws InputError on missing fields or wrong types.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
nlohmann::ordered_json scenario_to_json(const Scenario& scenario);

/// Tree, book and constraints built from a scenario. The book refers to the
/// tree's layout only at construction, so the members may be moved together.
struct Model {
  std::unique_ptr<ScenarioTree> tree;
  std::unique_ptr<ContractBook> book;
  ConstraintConfig config;
};

Model build_model(const Scenario& scenario, double tol_prob = kTolProb);

}  // namespace reinsqp

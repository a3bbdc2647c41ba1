#include "reinsqp/scenario_io.hpp"

#include "reinsqp/errors.hpp"

#include <fstream>

namespace reinsqp {

namespace {

using nlohmann::json;

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object() || !obj.contains(name)) throw InputError(where + ": missing field '" + name + "'");
  return obj.at(name);
}

int as_int(const json& v, const std::string& what) {
  if (!v.is_number_integer()) throw InputError(what + " must be an integer");
  return v.get<int>();
}

double as_double(const json& v, const std::string& what) {
  if (!v.is_number()) throw InputError(what + " must be a number");
  return v.get<double>();
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  if (!doc.is_object()) throw InputError("scenario: top level must be an object");
  Scenario s;
  s.tree.n_contracts = as_int(field(doc, "N", "scenario"), "N");
  s.tree.t_bar = as_int(field(doc, "T_bar", "scenario"), "T_bar");
  s.tree.t_tail = as_int(field(doc, "T", "scenario"), "T");
  s.constraints.k0 = doc.contains("K0") ? as_double(doc.at("K0"), "K0") : 0.0;

  const json& nodes = field(doc, "nodes", "scenario");
  if (!nodes.is_array()) throw InputError("nodes must be an array");
  for (const json& n : nodes) {
    NodeSpec spec;
    spec.id = field(n, "id", "node").get<NodeId>();
    const json& parent = field(n, "parent", "node");
    if (!parent.is_null()) {
      if (!parent.is_number_integer()) throw InputError("node parent must be an integer or null");
      spec.parent = parent.get<NodeId>();
    }
    spec.depth = as_int(field(n, "depth", "node"), "node depth");
    spec.prob = as_double(field(n, "prob", "node"), "node prob");
    s.tree.nodes.push_back(spec);
  }

  if (doc.contains("utilities")) {
    const json& utils = doc.at("utilities");
    if (!utils.is_array()) throw InputError("utilities must be an array");
    for (const json& u : utils) {
      UtilityEntry e;
      e.issue_time = as_int(field(u, "issue_time", "utility"), "utility issue_time");
      e.contract = as_int(field(u, "contract", "utility"), "utility contract");
      const json& node = field(u, "node", "utility");
      if (!node.is_number_integer()) throw InputError("utility node must be an integer");
      e.node = node.get<NodeId>();
      e.value = as_double(field(u, "value", "utility"), "utility value");
      s.utilities.push_back(e);
    }
  }

  const json& cons = field(doc, "constraints", "scenario");
  const json& c = field(cons, "c", "constraints");
  if (!c.is_array()) throw InputError("constraints.c must be an array");
  for (const json& v : c) s.constraints.c.push_back(as_double(v, "constraints.c entry"));
  s.constraints.e = as_double(field(cons, "e", "constraints"), "constraints.e");
  if (cons.contains("sigma2") && !cons.at("sigma2").is_null()) {
    s.constraints.sigma2 = as_double(cons.at("sigma2"), "constraints.sigma2");
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& ex) {
    throw InputError("scenario file '" + path + "' is not valid JSON: " + ex.what());
  }
  try {
    return parse_scenario(doc);
  } catch (const json::exception& ex) {
    throw InputError("scenario file '" + path + "': " + ex.what());
  }
}

nlohmann::ordered_json scenario_to_json(const Scenario& s) {
  nlohmann::ordered_json doc;
  doc["N"] = s.tree.n_contracts;
  doc["T_bar"] = s.tree.t_bar;
  doc["T"] = s.tree.t_tail;
  doc["K0"] = s.constraints.k0;
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : s.tree.nodes) {
    nlohmann::ordered_json j;
    j["id"] = n.id;
    j["parent"] = n.parent ? nlohmann::ordered_json(*n.parent) : nlohmann::ordered_json(nullptr);
    j["depth"] = n.depth;
    j["prob"] = n.prob;
    nodes.push_back(j);
  }
  doc["nodes"] = nodes;
  auto utils = nlohmann::ordered_json::array();
  for (const auto& u : s.utilities) {
    nlohmann::ordered_json j;
    j["issue_time"] = u.issue_time;
    j["contract"] = u.contract;
    j["node"] = u.node;
    j["value"] = u.value;
    utils.push_back(j);
  }
  doc["utilities"] = utils;
  nlohmann::ordered_json cons;
  cons["c"] = s.constraints.c;
  cons["e"] = s.constraints.e;
  cons["sigma2"] = s.constraints.sigma2 ? nlohmann::ordered_json(*s.constraints.sigma2)
                                        : nlohmann::ordered_json(nullptr);
  doc["constraints"] = cons;
  return doc;
}

Model build_model(const Scenario& scenario, double tol_prob) {
  Model m;
  m.tree = std::make_unique<ScenarioTree>(scenario.tree, tol_prob);
  m.book = std::make_unique<ContractBook>(*m.tree, scenario.utilities);
  m.config = scenario.constraints;
  validate_config(*m.tree, m.config);
  return m;
}

}  // namespace reinsqp

#include "reinsqp/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reinsqp::report {

namespace {

Json vec(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json check(const HypothesisCheck& c) {
  Json j;
  j["ok"] = c.ok;
  j["worst"] = c.worst;
  j["location"] = c.location;
  return j;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

Json validation(const ValidationReport& rep) {
  Json j;
  j["ok"] = rep.ok();
  Json list = Json::array();
  for (const auto& v : rep.violations) {
    Json e;
    e["message"] = v.message;
    e["nodes"] = v.nodes;
    list.push_back(e);
  }
  j["violations"] = list;
  return j;
}

Json hypotheses(const HypothesisReport& rep) {
  Json j;
  j["all_ok"] = rep.all_ok();
  j["h1"] = check(rep.h1);
  j["h2"] = check(rep.h2);
  j["h3"] = check(rep.h3);
  Json h1k = Json::array();
  for (const auto& c : rep.h1_per_k) h1k.push_back(check(c));
  Json h2k = Json::array();
  for (const auto& c : rep.h2_per_k) h2k.push_back(check(c));
  j["h1_per_k"] = h1k;
  j["h2_per_k"] = h2k;
  return j;
}

Json constraints(const ConstraintReport& rep) {
  Json j;
  j["roe_slack"] = rep.roe_slack;
  j["mean_value"] = rep.mean_value;
  j["mean_slack"] = rep.mean_slack;
  j["variance"] = rep.variance;
  j["variance_slack"] = rep.variance_slack ? Json(*rep.variance_slack) : Json(nullptr);
  j["min_eta"] = rep.min_eta;
  j["feasible_c0"] = rep.feasible_c0;
  j["feasible_c1"] = rep.feasible_c1;
  j["feasible_c2"] = rep.feasible_c2;
  return j;
}

Json kkt(const KktReport& rep) {
  Json j;
  j["stationarity"] = rep.stationarity;
  j["stationarity_abs"] = rep.stationarity_abs;
  j["sign_violation"] = rep.sign_violation;
  j["complementarity"] = rep.complementarity;
  j["infeasibility"] = rep.infeasibility;
  j["max_residual"] = rep.max_residual();
  j["tol"] = rep.tol;
  j["converged"] = rep.converged;
  return j;
}

Json portfolio(const ScenarioTree& tree, const PortfolioProcess& eta) {
  Json out = Json::array();
  for (int k = 0; k < eta.stage_count(); ++k) {
    const auto layer = tree.layer(k);
    for (std::size_t pos = 0; pos < layer.size(); ++pos) {
      const int node = layer[pos];
      Json e;
      e["stage"] = k;
      e["node"] = tree.id(node);
      e["prob"] = tree.path_probability(node);
      e["eta"] = vec(eta.stage(k).values().row(static_cast<Eigen::Index>(pos)).transpose());
      out.push_back(e);
    }
  }
  return out;
}

Json multipliers(const ScenarioTree& tree, const MultiplierSet& mult) {
  Json j;
  j["lambda"] = vec(mult.lambda);
  j["mu"] = mult.mu;
  j["nu"] = mult.nu.stage_count() > 0 ? portfolio(tree, mult.nu) : Json::array();
  return j;
}

Json validate_report(const ScenarioTree& tree, const HypothesisReport& hyp, double representer_error) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "validate";
  j["status"] = "ok";
  Json t;
  t["N"] = tree.n_contracts();
  t["T_bar"] = tree.t_bar();
  t["T"] = tree.t_tail();
  t["nodes"] = tree.node_count();
  t["coordinates"] = coordinate_count(tree);
  j["tree"] = t;
  j["validation"] = validation(ValidationReport{});
  j["hypotheses"] = hypotheses(hyp);
  j["representer_self_check"] = representer_error;
  return j;
}

Json solve_report(const ScenarioTree& tree, const PipelineResult& res) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "solve";
  j["status"] = res.kkt.converged ? "ok" : "not_converged";
  j["form"] = std::string(to_string(res.form));
  j["source"] = res.source;
  j["e_used"] = res.e_used;
  j["mean"] = res.mean;
  j["variance"] = res.variance;
  j["portfolio"] = portfolio(tree, res.eta);
  j["multipliers"] = multipliers(tree, res.multipliers);
  j["kkt"] = kkt(res.kkt);
  j["constraints"] = constraints(res.constraints);
  Json it;
  it["iterations"] = res.iterations;
  it["history"] = res.history;
  it["converged"] = res.structured_converged;
  it["non_monotone"] = res.non_monotone;
  it["diverging"] = res.diverging;
  it["near_singular_l"] = res.near_singular_l;
  it["deterministic_feasible"] = res.deterministic_feasible;
  it["mean_search_steps"] = res.mean_search_steps;
  it["kkt"] = kkt(res.structured_kkt);
  j["structured"] = it;
  j["fallbacks"] = res.fallbacks;
  return j;
}

Json oracle_report(const ScenarioTree& tree, const OracleResult& res, const KktReport& kkt_rep,
                   const ConstraintReport& cons) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "oracle";
  j["status"] = kkt_rep.converged ? "ok" : "not_converged";
  j["form"] = std::string(to_string(res.form));
  j["source"] = "dense";
  j["e_used"] = res.e_used;
  j["mean"] = res.mean;
  j["variance"] = res.variance;
  j["portfolio"] = portfolio(tree, res.eta);
  j["multipliers"] = multipliers(tree, res.multipliers);
  j["kkt"] = kkt(kkt_rep);
  j["constraints"] = constraints(cons);
  Json cert;
  cert["second_moment"] = res.second_moment;
  cert["stationarity"] = res.stationarity;
  cert["complementarity"] = res.complementarity;
  cert["infeasibility"] = res.infeasibility;
  cert["qp_iterations"] = res.qp_iterations;
  cert["bisection_steps"] = res.bisection_steps;
  j["certificate"] = cert;
  j["fallbacks"] = Json::array();
  return j;
}

Json spectrum_report(const SpectralSets& sets, const std::vector<double>& dense_a,
                     const std::vector<double>& dense_b, double containment_a, double containment_b) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "spectrum";
  j["status"] = "ok";
  j["lambda"] = sets.lambda;
  j["sigma_a"] = sets.sigma_a;
  j["sigma_b"] = sets.sigma_b;
  j["levels_a"] = sets.levels_a;
  j["levels_b"] = sets.levels_b;
  j["dense_a"] = dense_a;
  j["dense_b"] = dense_b;
  j["containment_a"] = containment_a;
  j["containment_b"] = containment_b;
  j["min_eig_b"] = dense_b.empty() ? Json(nullptr) : Json(dense_b.front());
  return j;
}

double max_set_distance(const std::vector<double>& values, const std::vector<double>& set) {
  double worst = 0.0;
  for (double v : values) {
    double best = std::numeric_limits<double>::infinity();
    for (double s : set) best = std::min(best, std::abs(v - s));
    worst = std::max(worst, best);
  }
  return worst;
}

Comparison compare(const ScenarioTree& tree, const PipelineResult& solved, const OracleResult& oracle) {
  Comparison c;
  const double denom = std::max(h_norm(tree, oracle.eta), 1e-300);
  c.eta_rel_deviation = h_norm(tree, solved.eta - oracle.eta) / denom;
  if (h_norm(tree, oracle.eta) == 0.0) c.eta_rel_deviation = h_norm(tree, solved.eta);
  c.mean_rel_deviation = rel(solved.mean, oracle.mean);
  c.variance_rel_deviation = rel(solved.variance, oracle.variance);
  c.max_rel_deviation = std::max({c.eta_rel_deviation, c.mean_rel_deviation, c.variance_rel_deviation});
  return c;
}

Json compare_report(const ScenarioTree& tree, const PipelineResult& solved, const OracleResult& oracle,
                    const Comparison& cmp) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "compare";
  j["status"] = "ok";
  j["form"] = std::string(to_string(solved.form));
  j["max_rel_deviation"] = cmp.max_rel_deviation;
  j["eta_rel_deviation"] = cmp.eta_rel_deviation;
  j["mean_rel_deviation"] = cmp.mean_rel_deviation;
  j["variance_rel_deviation"] = cmp.variance_rel_deviation;
  Json side = Json::array();
  for (int k = 0; k < solved.eta.stage_count(); ++k) {
    const auto layer = tree.layer(k);
    for (std::size_t pos = 0; pos < layer.size(); ++pos) {
      const auto r = static_cast<Eigen::Index>(pos);
      Json e;
      e["stage"] = k;
      e["node"] = tree.id(layer[pos]);
      e["solve"] = vec(solved.eta.stage(k).values().row(r).transpose());
      e["oracle"] = vec(oracle.eta.stage(k).values().row(r).transpose());
      side.push_back(e);
    }
  }
  j["portfolio"] = side;
  Json s;
  s["source"] = solved.source;
  s["mean"] = solved.mean;
  s["variance"] = solved.variance;
  s["kkt"] = kkt(solved.kkt);
  s["fallbacks"] = solved.fallbacks;
  j["solve"] = s;
  Json o;
  o["mean"] = oracle.mean;
  o["variance"] = oracle.variance;
  o["e_used"] = oracle.e_used;
  j["oracle"] = o;
  return j;
}

Json error_report(const std::string& status, const std::string& message) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["status"] = status;
  j["error"] = message;
  return j;
}

}  // namespace reinsqp::report

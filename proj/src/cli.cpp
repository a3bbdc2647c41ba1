#include "reinsqp/cli.hpp"

#include "reinsqp/errors.hpp"
#include "reinsqp/report.hpp"
#include "reinsqp/scenario_io.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace reinsqp {

namespace {

struct RunConfig {
  std::string input;
  std::string form = "min-variance";
  std::optional<double> e;
  std::optional<double> sigma2;
  double tol_kkt = kTolKkt;
  double tol_feas = kTolFeas;
  double tol_mom = kTolMom;
  double tol_pd = kTolPd;
  int max_iter = 500;
  bool strict = false;
  bool no_fallback = false;
  std::string output;
  std::uint64_t seed = 1;
  // frontier
  double e_min = 0.0;
  double e_max = 1.0;
  int points = 11;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("reinsqp");
  logger->set_pattern("level=%l %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("REINSQP_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(cfg.output);
  if (!out) throw InputError("cannot write output file '" + cfg.output + "'");
  out << text;
}

void emit_json(const RunConfig& cfg, const report::Json& doc) { emit(cfg, doc.dump(2) + "\n"); }

ConstraintConfig effective_config(const RunConfig& cfg, const Model& model) {
  ConstraintConfig c = model.config;
  if (cfg.e) c.e = *cfg.e;
  if (cfg.sigma2) c.sigma2 = *cfg.sigma2;
  validate_config(*model.tree, c);
  return c;
}

SolveOptions solve_options(const RunConfig& cfg) {
  SolveOptions o;
  o.form = parse_form(cfg.form);
  o.tol_kkt = cfg.tol_kkt;
  o.max_iter = cfg.max_iter;
  o.dense_fallback = !cfg.no_fallback;
  return o;
}

/// Returns false when --strict is set and a hypothesis fails.
bool hypotheses_gate(const RunConfig& cfg, const Model& model) {
  const HypothesisReport hyp = check_hypotheses(*model.tree, *model.book, cfg.tol_mom, cfg.tol_pd);
  if (hyp.all_ok()) return true;
  for (const auto& [name, c] : {std::pair{"h1", &hyp.h1}, std::pair{"h2", &hyp.h2}, std::pair{"h3", &hyp.h3}}) {
    if (!c->ok) spdlog::warn("event=hypothesis_failed name={} worst={:.3e} location=\"{}\"", name, c->worst, c->location);
  }
  return !cfg.strict;
}

int cmd_validate(const RunConfig& cfg) {
  const Scenario sc = load_scenario(cfg.input);
  const ValidationReport vr = validate_tree(sc.tree);
  if (!vr.ok()) {
    report::Json doc = report::error_report("invalid", "scenario tree failed validation");
    doc["command"] = "validate";
    doc["validation"] = report::validation(vr);
    emit_json(cfg, doc);
    for (const auto& v : vr.violations) spdlog::error("event=tree_violation message=\"{}\"", v.message);
    return kExitInput;
  }
  const Model model = build_model(sc);
  const HypothesisReport hyp = check_hypotheses(*model.tree, *model.book, cfg.tol_mom, cfg.tol_pd);
  const Representers reps = representers(*model.tree, *model.book, model.config);
  const double rep_err = representer_self_check(*model.tree, *model.book, model.config, reps, 20, cfg.seed);
  report::Json doc = report::validate_report(*model.tree, hyp, rep_err);
  if (!hyp.all_ok()) doc["status"] = "hypotheses_failed";
  emit_json(cfg, doc);
  spdlog::info("event=validate h1={} h2={} h3={}", hyp.h1.ok, hyp.h2.ok, hyp.h3.ok);
  return (!hyp.all_ok() && cfg.strict) ? kExitInput : kExitOk;
}

int cmd_solve(const RunConfig& cfg) {
  const Model model = build_model(load_scenario(cfg.input));
  if (!hypotheses_gate(cfg, model)) return kExitInput;
  const ConstraintConfig config = effective_config(cfg, model);
  PipelineResult res = solve_pipeline(*model.tree, *model.book, config, solve_options(cfg));
  res.constraints = evaluate_constraints(*model.tree, *model.book, res.eta, config, cfg.tol_feas);
  emit_json(cfg, report::solve_report(*model.tree, res));
  spdlog::info("event=solve source={} iterations={} max_residual={:.3e} converged={}", res.source, res.iterations,
               res.kkt.max_residual(), res.kkt.converged);
  for (const auto& f : res.fallbacks) spdlog::warn("event=fallback name={}", f);
  if (res.non_monotone) spdlog::warn("event=non_monotone_history diverging={}", res.diverging);
  return res.kkt.converged ? kExitOk : kExitNumerical;
}

int cmd_oracle(const RunConfig& cfg) {
  const Model model = build_model(load_scenario(cfg.input));
  if (!hypotheses_gate(cfg, model)) return kExitInput;
  const ConstraintConfig config = effective_config(cfg, model);
  const ProblemForm form = parse_form(cfg.form);
  const OracleResult res = dense_qp(*model.tree, *model.book, config, form);
  ConstraintConfig used = config;
  used.e = res.e_used;
  const ProblemForm check_form = form == ProblemForm::MaxMean ? ProblemForm::MinVariance : form;
  const KktReport kkt = kkt_verify(*model.tree, *model.book, used, res.eta, res.multipliers, check_form, cfg.tol_kkt);
  const ConstraintReport cons = evaluate_constraints(*model.tree, *model.book, res.eta, config, cfg.tol_feas);
  emit_json(cfg, report::oracle_report(*model.tree, res, kkt, cons));
  spdlog::info("event=oracle qp_iterations={} max_residual={:.3e}", res.qp_iterations, kkt.max_residual());
  return kkt.converged ? kExitOk : kExitNumerical;
}

int cmd_spectrum(const RunConfig& cfg) {
  const Model model = build_model(load_scenario(cfg.input));
  if (!hypotheses_gate(cfg, model)) return kExitInput;
  const MomentTables moments = moment_tables(*model.tree, *model.book);
  const SpectralSets sets = spectral_sets(moments, 0.0);
  const std::vector<double> da = dense_spectrum(OperatorKind::A, *model.tree, *model.book);
  const std::vector<double> db = dense_spectrum(OperatorKind::B, *model.tree, *model.book);
  double ca = 0.0;
  double cb = 0.0;
  for (double l : da) ca = std::max(ca, sigma_distance(OperatorKind::A, moments, l));
  for (double l : db) cb = std::max(cb, sigma_distance(OperatorKind::B, moments, l));
  emit_json(cfg, report::spectrum_report(sets, da, db, ca, cb));
  spdlog::info("event=spectrum containment_a={:.3e} containment_b={:.3e}", ca, cb);
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg) {
  const Model model = build_model(load_scenario(cfg.input));
  if (!hypotheses_gate(cfg, model)) return kExitInput;
  const ConstraintConfig config = effective_config(cfg, model);
  const SolveOptions options = solve_options(cfg);
  const PipelineResult solved = solve_pipeline(*model.tree, *model.book, config, options);
  const OracleResult oracle = dense_qp(*model.tree, *model.book, config, options.form);
  const report::Comparison cmp = report::compare(*model.tree, solved, oracle);
  emit_json(cfg, report::compare_report(*model.tree, solved, oracle, cmp));
  spdlog::info("event=compare max_rel_deviation={:.3e} source={}", cmp.max_rel_deviation, solved.source);
  return kExitOk;
}

int cmd_frontier(const RunConfig& cfg) {
  const Model model = build_model(load_scenario(cfg.input));
  if (!hypotheses_gate(cfg, model)) return kExitInput;
  if (cfg.points < 1) throw InputError("--points must be at least 1");
  SolveOptions options = solve_options(cfg);
  options.form = ProblemForm::MinVariance;
  std::ostringstream csv;
  csv << "e,variance,mean,source,converged\n";
  csv.precision(17);
  for (int i = 0; i < cfg.points; ++i) {
    const double e = cfg.points == 1 ? cfg.e_min
                                     : cfg.e_min + (cfg.e_max - cfg.e_min) * i / static_cast<double>(cfg.points - 1);
    ConstraintConfig c = model.config;
    c.e = e;
    try {
      const PipelineResult r = solve_pipeline(*model.tree, *model.book, c, options);
      csv << e << ',' << r.variance << ',' << r.mean << ',' << r.source << ',' << (r.kkt.converged ? 1 : 0) << '\n';
    } catch (const Infeasible&) {
      csv << e << ",,,infeasible,0\n";
      spdlog::info("event=frontier_infeasible e={}", e);
    }
  }
  emit(cfg, csv.str());
  return kExitOk;
}

void common_flags(CLI::App* sub, RunConfig& cfg, bool solve_flags) {
  sub->add_option("--input,-i", cfg.input, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--output,-o", cfg.output, "Report path (default: stdout)");
  sub->add_option("--tol-mom", cfg.tol_mom, "Moment tolerance for hypothesis checks")->check(CLI::PositiveNumber);
  sub->add_option("--tol-pd", cfg.tol_pd, "Definiteness tolerance")->check(CLI::PositiveNumber);
  sub->add_flag("--strict", cfg.strict, "Fail with exit 1 when a hypothesis check fails");
  sub->add_option("--seed", cfg.seed, "Seed for randomized self-checks");
  if (!solve_flags) return;
  sub->add_option("--form", cfg.form, "min-variance | fixed-mean | max-mean")
      ->check(CLI::IsMember({"min-variance", "fixed-mean", "max-mean"}));
  sub->add_option("--e", cfg.e, "Override the mean floor e");
  sub->add_option("--sigma2", cfg.sigma2, "Override the variance cap")->check(CLI::NonNegativeNumber);
  sub->add_option("--tol-kkt", cfg.tol_kkt, "KKT residual tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--tol-feas", cfg.tol_feas, "Feasibility tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", cfg.max_iter, "Maximum approximation cycles")->check(CLI::NonNegativeNumber);
  sub->add_flag("--no-fallback", cfg.no_fallback, "Do not fall back to the dense QP");
}

}  // namespace

int run_cli(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Multiperiod reinsurance mean-variance portfolio solver"};
  app.require_subcommand(1, 1);
  RunConfig cfg;

  auto* validate = app.add_subcommand("validate", "Validate the tree and check the moment hypotheses");
  common_flags(validate, cfg, false);
  auto* solve_cmd = app.add_subcommand("solve", "Structured solve with KKT report");
  common_flags(solve_cmd, cfg, true);
  auto* oracle = app.add_subcommand("oracle", "Dense QP certificate");
  common_flags(oracle, cfg, true);
  auto* spectrum = app.add_subcommand("spectrum", "Sigma sets and dense eigenvalues");
  common_flags(spectrum, cfg, false);
  auto* compare = app.add_subcommand("compare", "Structured solve against the dense oracle");
  common_flags(compare, cfg, true);
  auto* frontier = app.add_subcommand("frontier", "Efficient frontier as CSV (e, variance)");
  common_flags(frontier, cfg, true);
  frontier->add_option("--e-min", cfg.e_min, "First mean level");
  frontier->add_option("--e-max", cfg.e_max, "Last mean level");
  frontier->add_option("--points", cfg.points, "Number of mean levels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (validate->parsed()) return cmd_validate(cfg);
    if (solve_cmd->parsed()) return cmd_solve(cfg);
    if (oracle->parsed()) return cmd_oracle(cfg);
    if (spectrum->parsed()) return cmd_spectrum(cfg);
    if (compare->parsed()) return cmd_compare(cfg);
    if (frontier->parsed()) return cmd_frontier(cfg);
  } catch (const Infeasible& ex) {
    spdlog::error("event=infeasible message=\"{}\"", ex.what());
    emit_json(cfg, report::error_report("infeasible", ex.what()));
    return kExitInfeasible;
  } catch (const InputError& ex) {
    spdlog::error("event=input_error message=\"{}\"", ex.what());
    return kExitInput;
  } catch (const NumericalError& ex) {
    spdlog::error("event=numerical_error message=\"{}\"", ex.what());
    emit_json(cfg, report::error_report("numerical_failure", ex.what()));
    return kExitNumerical;
  } catch (const std::exception& ex) {
    spdlog::error("event=internal_error message=\"{}\"", ex.what());
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace reinsqp

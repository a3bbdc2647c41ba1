#include "doctest.h"

#include "../support/fixtures.hpp"
#include "reinsqp/errors.hpp"
#include "reinsqp/multipliers.hpp"
#include "reinsqp/oracle.hpp"
#include "reinsqp/pipeline.hpp"

#include <cmath>
#include <random>

using namespace reinsqp;
using namespace reinsqp::testing;

#ifndef REINSQP_DATA_DIR
#define REINSQP_DATA_DIR "data"
#endif

TEST_SUITE("multipliers") {
  TEST_CASE("problem form names") {
    CHECK(parse_form("min-variance") == ProblemForm::MinVariance);
    CHECK(parse_form("fixed-mean") == ProblemForm::FixedMean);
    CHECK(parse_form("max-mean") == ProblemForm::MaxMean);
    CHECK(to_string(ProblemForm::FixedMean) == "fixed-mean");
    CHECK_THROWS_AS(parse_form("max-variance"), InputError);
    CHECK(operator_for(ProblemForm::FixedMean) == OperatorKind::A);
    CHECK(operator_for(ProblemForm::MinVariance) == OperatorKind::B);
  }

  TEST_CASE("stacked multipliers round trip") {
    const Model m = coin2_model();
    MultiplierSet s;
    s.lambda = Eigen::Vector2d(0.25, 0.5);
    s.mu = 1.5;
    s.nu = PortfolioProcess::zeros(*m.tree);
    const Eigen::VectorXd st = s.stacked();
    REQUIRE(st.size() == 3);
    CHECK(st(2) == 1.5);
    const MultiplierSet back = MultiplierSet::from_stacked(st, s.nu);
    CHECK(back.mu == 1.5);
    CHECK((back.lambda - s.lambda).norm() == 0.0);
  }

  TEST_CASE("L gram: symmetric, r(0) = 0, entries agree with dense inverse") {
    std::mt19937_64 rng(19);
    for (int rep = 0; rep < 5; ++rep) {
      const Model m = build_model(random_scenario(rng));
      const MultiplierContext ctx(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
      const LGram& g = ctx.gram();
      CHECK((g.l_inv - g.l_inv.transpose()).norm() <= 1e-10 * (1.0 + g.l_inv.norm()));
      CHECK(g.r(*m.tree, ctx.c_inverse(), PortfolioProcess::zeros(*m.tree)).norm() == 0.0);
      const auto rows = ctx.representers().constraint_rows();
      const Eigen::VectorXd w = coordinate_weights(*m.tree);
      for (std::size_t s = 0; s < rows.size(); ++s) {
        const Eigen::VectorXd cinv =
            dense_solve_linear(OperatorKind::B, *m.tree, *m.book, rows[s].coordinates());
        for (std::size_t t = 0; t < rows.size(); ++t) {
          const double ref = rows[t].coordinates().dot(w.cwiseProduct(cinv));
          CHECK(g.l_inv(t, s) == doctest::Approx(ref).epsilon(1e-8).scale(1.0));
        }
      }
    }
  }

  TEST_CASE("coin2 L gram flags the zero profitability row") {
    const Model m = coin2_model();
    const MultiplierContext ctx(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    CHECK(ctx.gram().near_singular);
  }

  TEST_CASE("deterministic solution with every constraint slack is zero") {
    const Model m = coin2_model(0.0);
    const DeterministicSolution det = deterministic_solution(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    CHECK(det.feasible);
    CHECK(h_norm(*m.tree, det.eta) == 0.0);
    CHECK(det.multipliers.stacked().norm() == 0.0);
  }

  TEST_CASE("deterministic solution is constant per stage and complementary") {
    std::mt19937_64 rng(29);
    for (int rep = 0; rep < 10; ++rep) {
      const Model m = build_model(random_scenario(rng));
      const DeterministicSolution det = deterministic_solution(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
      if (!det.feasible) continue;
      for (int k = 0; k <= m.tree->t_bar(); ++k) {
        const Eigen::MatrixXd& v = det.eta.stage(k).values();
        CHECK((v.rowwise() - v.row(0)).norm() == 0.0);
      }
      CHECK(det.complementarity <= 1e-10);
      CHECK(det.eta.min_value() >= -1e-12);
    }
  }

  TEST_CASE("single active mean constraint: closed form") {
    // c = 0, K0 = 0: only the mean row can bind. With eta_D constant per stage the
    // restricted problem is min v^T S v s.t. E(m)^T v >= e, v >= 0, S the stage covariance.
    const Model m = coin2_model(3.0);
    const DeterministicSolution det = deterministic_solution(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    REQUIRE(det.feasible);
    // Cov of (u0, u1) is I (independent, variance 1 each); mean vector (2, 1):
    // v = e * S^{-1} m / (m^T S^{-1} m) = 3 (2, 1) / 5 and S v = mu m gives mu = 3/5.
    CHECK(det.eta.stage(0).values()(0, 0) == doctest::Approx(1.2));
    CHECK(det.eta.stage(1).values()(0, 0) == doctest::Approx(0.6));
    CHECK(det.multipliers.mu == doctest::Approx(0.6));
  }

  TEST_CASE("theta vanishes at zero and is a fixed point at the oracle optimum") {
    const Model m = coin2_model(3.0);
    const MultiplierContext ctx(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    for (int k = 0; k <= 1; ++k) {
      CHECK(theta(ctx, k, +1, zero, PortfolioProcess::zeros(*m.tree)).values().norm() == 0.0);
      CHECK(theta(ctx, k, -1, zero, PortfolioProcess::zeros(*m.tree)).values().norm() == 0.0);
    }
    const OracleResult o = dense_qp(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    const Eigen::VectorXd lam = o.multipliers.stacked();
    for (int k = 0; k <= 1; ++k) {
      const AdaptedVariable tp = theta(ctx, k, +1, lam, o.eta);
      const AdaptedVariable tm = theta(ctx, k, -1, lam, o.eta);
      CHECK((tp.values() - o.eta.stage(k).values()).norm() <= 1e-6);
      CHECK((tm.values() - o.multipliers.nu.stage(k).values()).norm() <= 1e-6);
    }
  }

  TEST_CASE("assemble_solution: zero multipliers and the mean representer") {
    const Model m = coin2_model(3.0);
    const MultiplierContext ctx(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    MultiplierSet s;
    s.lambda = Eigen::Vector2d::Zero();
    s.nu = PortfolioProcess::zeros(*m.tree);
    CHECK(h_norm(*m.tree, assemble_solution(ctx, s)) == 0.0);
    s.mu = 1.0;
    const auto ref = PortfolioProcess::from_coordinates(
        *m.tree, dense_solve_linear(OperatorKind::B, *m.tree, *m.book, ctx.representers().m.coordinates()));
    CHECK(rel_h_error(*m.tree, assemble_solution(ctx, s), ref) < 1e-10);
  }

  TEST_CASE("first approximation is nonnegative; max_iter = 0 returns it unchanged") {
    std::mt19937_64 rng(37);
    for (int rep = 0; rep < 8; ++rep) {
      const Model m = build_model(random_scenario(rng));
      const DeterministicSolution det = deterministic_solution(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
      const MultiplierContext ctx(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
      const Approximation first = first_approximation(ctx, det);
      CHECK(first.eta_hat.min_value() >= 0.0);
      CHECK(first.nu.min_value() >= 0.0);
      const IterationResult it = iterate(ctx, first, 0);
      CHECK(it.iterations == 0);
      CHECK(rel_h_error(*m.tree, it.last.eta_hat, first.eta_hat) == 0.0);
      CHECK(it.history.size() == 1);
    }
  }

  TEST_CASE("iterating from a converged point does no further cycles") {
    const Model m = coin2_model(0.0);
    const MultiplierContext ctx(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    const DeterministicSolution det = deterministic_solution(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    const IterationResult it = iterate(ctx, first_approximation(ctx, det), 20);
    CHECK(it.converged);
    CHECK(it.iterations == 0);
  }

  TEST_CASE("KKT verification of the oracle optimum on coin2") {
    const Model m = coin2_model(3.0);
    const OracleResult o = dense_qp(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    const KktReport k = kkt_verify(*m.tree, *m.book, m.config, o.eta, o.multipliers, ProblemForm::MinVariance);
    CHECK(k.converged);
    CHECK(k.max_residual() <= 1e-8);
    MultiplierSet wrong = o.multipliers;
    wrong.mu *= 1.1;
    CHECK_FALSE(kkt_verify(*m.tree, *m.book, m.config, o.eta, wrong, ProblemForm::MinVariance).converged);
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("coin2 min-variance agrees with the oracle") {
    const Model m = coin2_model(3.0);
    const PipelineResult r = solve_pipeline(*m.tree, *m.book, m.config);
    const OracleResult o = dense_qp(*m.tree, *m.book, m.config, ProblemForm::MinVariance);
    CHECK(r.kkt.converged);
    CHECK(rel_h_error(*m.tree, r.eta, o.eta) < 1e-6);
    CHECK(r.mean == doctest::Approx(3.0).epsilon(1e-8));
  }

  TEST_CASE("no convergence claim without reaching tolerance") {
    const Model m = coin2_model(3.0);
    SolveOptions opt;
    opt.max_iter = 3;
    opt.dense_fallback = false;
    const PipelineResult r = solve_pipeline(*m.tree, *m.book, m.config, opt);
    CHECK_FALSE(r.structured_converged);
    CHECK_FALSE(r.kkt.converged);
    CHECK(r.source == "structured");
    CHECK(r.kkt.max_residual() > opt.tol_kkt);
  }

  TEST_CASE("unattainable profitability is infeasible") {
    const Model m = coin2_model(3.0);
    ConstraintConfig cfg = m.config;
    cfg.c = {0.5, 0.5};
    cfg.k0 = 1.0;
    CHECK_THROWS_AS(solve_pipeline(*m.tree, *m.book, cfg), Infeasible);
  }

  TEST_CASE("inconsistent rows: the structured cycle stops, the dense fallback decides") {
    const Model m = coin2_model(3.0);
    ConstraintConfig cfg = m.config;
    cfg.c = {0.5, 0.5};
    cfg.k0 = 1.0;  // the t = 0 representer is zero, its level is 0.5
    SolveOptions opt;
    opt.dense_fallback = false;
    CHECK_THROWS_AS(solve_pipeline(*m.tree, *m.book, cfg, opt), NumericalError);
  }

  TEST_CASE("a runaway structured cycle is stopped and flagged, never reported as converged") {
    const Model m = build_model(load_scenario(std::string(REINSQP_DATA_DIR) + "/two_contracts.json"));
    SolveOptions opt;
    opt.dense_fallback = false;
    const PipelineResult r = solve_pipeline(*m.tree, *m.book, m.config, opt);
    CHECK(r.diverging);
    CHECK_FALSE(r.kkt.converged);
    CHECK(r.iterations < opt.max_iter);
    for (double h : r.history) CHECK(std::isfinite(h));
    CHECK(std::isfinite(r.kkt.max_residual()));

    const PipelineResult fallback = solve_pipeline(*m.tree, *m.book, m.config);
    CHECK(fallback.source == "dense");
    CHECK(fallback.kkt.converged);
  }

  TEST_CASE("fixed-mean and max-mean forms on random instances") {
    std::mt19937_64 rng(53);
    for (int rep = 0; rep < 5; ++rep) {
      const Model m = build_model(random_scenario(rng));
      SolveOptions fixed;
      fixed.form = ProblemForm::FixedMean;
      PipelineResult r;
      try {
        r = solve_pipeline(*m.tree, *m.book, m.config, fixed);
      } catch (const Infeasible&) {
        continue;
      }
      CHECK(r.kkt.converged);
      CHECK(r.mean == doctest::Approx(m.config.e).epsilon(1e-8));
      const OracleResult o = dense_qp(*m.tree, *m.book, m.config, ProblemForm::FixedMean);
      CHECK(rel_h_error(*m.tree, r.eta, o.eta) < 1e-6);
    }
  }
}

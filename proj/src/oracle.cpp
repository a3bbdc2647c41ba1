#include "reinsqp/oracle.hpp"

#include "mean_search.hpp"
#include "reinsqp/dual_active_set.hpp"
#include "reinsqp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace reinsqp {

namespace {

void check_dim(const ScenarioTree& tree, int max_dim) {
  const int d = coordinate_count(tree);
  if (d > max_dim) {
    throw DimensionTooLarge("dense dimension " + std::to_string(d) + " exceeds cap " + std::to_string(max_dim));
  }
}

/// Column of coordinate (k, node at position pos, contract i).
Eigen::Index column(const std::vector<Eigen::Index>& offsets, int n, int k, int pos, int i) {
  return offsets[static_cast<std::size_t>(k)] + static_cast<Eigen::Index>(pos) * n + i;
}

std::vector<Eigen::Index> stage_offsets(const ScenarioTree& tree) {
  std::vector<Eigen::Index> off;
  Eigen::Index acc = 0;
  for (int k = 0; k <= tree.t_bar(); ++k) {
    off.push_back(acc);
    acc += static_cast<Eigen::Index>(tree.layer_size(k)) * tree.n_contracts();
  }
  return off;
}

/// Coefficients of E(sum_k eta(k) . u(k, t) at depth t) over the coordinates:
/// sum over depth-t nodes w of p_w u_i(k, t)(w), credited to anc_k(w).
Eigen::VectorXd expectation_row(const ScenarioTree& tree, const ContractBook& book, int t) {
  const int n = tree.n_contracts();
  const auto off = stage_offsets(tree);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(coordinate_count(tree));
  const auto nodes = tree.layer(t);
  for (int k = 0; k <= std::min(t, tree.t_bar()); ++k) {
    const auto& u = book.utility(k, t).values();
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      const int w = nodes[r];
      const int anc = tree.position(tree.ancestor(w, k));
      for (int i = 0; i < n; ++i) {
        row[column(off, n, k, anc, i)] += tree.path_probability(w) * u(static_cast<Eigen::Index>(r), i);
      }
    }
  }
  return row;
}

struct Weighted {
  Eigen::VectorXd sqrt_w;
  Eigen::VectorXd inv_sqrt_w;
};

Weighted weighting(const Eigen::VectorXd& w) {
  return {w.cwiseSqrt(), w.cwiseSqrt().cwiseInverse()};
}

struct InnerSolve {
  QpSolution qp;
  Eigen::VectorXd coords;
};

/// Min-variance (kind B, mean >= e) or fixed-mean (kind A, mean = e) in
/// weighted coordinates z = W^{1/2} eta.
InnerSolve solve_weighted(const DenseProblem& prob, bool mean_equality, double e) {
  const int d = prob.dim();
  const auto h = static_cast<int>(prob.rows.rows()) - 1;  // index of the mean row
  const Weighted wt = weighting(prob.weights);
  const Eigen::MatrixXd rows_z = prob.rows * wt.inv_sqrt_w.asDiagonal();
  DenseQp qp;
  qp.g = wt.inv_sqrt_w.asDiagonal() * prob.gram * wt.inv_sqrt_w.asDiagonal();
  qp.g = 0.5 * (qp.g + qp.g.transpose());
  qp.g0 = Eigen::VectorXd::Zero(d);
  const int n_lin = mean_equality ? h : h + 1;
  qp.a_in.resize(n_lin + d, d);
  qp.b_in.resize(n_lin + d);
  qp.a_in.topRows(n_lin) = rows_z.topRows(n_lin);
  qp.b_in.head(n_lin) = prob.levels.head(n_lin);
  if (!mean_equality) qp.b_in[h] = e;
  qp.a_in.bottomRows(d) = Eigen::MatrixXd::Identity(d, d);
  qp.b_in.tail(d).setZero();
  if (mean_equality) {
    qp.a_eq = rows_z.row(h);
    qp.b_eq = Eigen::VectorXd::Constant(1, e);
  } else {
    qp.a_eq.resize(0, d);
    qp.b_eq.resize(0);
  }
  InnerSolve out;
  out.qp = solve_dense_qp(qp);
  out.coords = wt.inv_sqrt_w.cwiseProduct(out.qp.x);
  return out;
}

OracleResult certify(const ScenarioTree& tree, const ContractBook& book, const DenseProblem& prob,
                     const InnerSolve& inner, ProblemForm form, bool mean_equality, double e) {
  const int d = prob.dim();
  const int h = static_cast<int>(prob.rows.rows()) - 1;
  const Weighted wt = weighting(prob.weights);
  const int n_lin = mean_equality ? h : h + 1;
  OracleResult r;
  r.form = form;
  r.e_used = e;
  r.eta = PortfolioProcess::from_coordinates(tree, inner.coords);
  Eigen::VectorXd lam(h + 1);
  lam.head(n_lin) = inner.qp.y_in.head(n_lin);
  if (mean_equality) lam[h] = inner.qp.y_eq[0];
  const Eigen::VectorXd nu_z = inner.qp.y_in.tail(d);
  r.multipliers = MultiplierSet::from_stacked(
      lam, PortfolioProcess::from_coordinates(tree, wt.inv_sqrt_w.cwiseProduct(nu_z)));

  const Eigen::VectorXd& z = inner.qp.x;
  const Eigen::MatrixXd g_z = wt.inv_sqrt_w.asDiagonal() * prob.gram * wt.inv_sqrt_w.asDiagonal();
  const Eigen::MatrixXd rows_z = prob.rows * wt.inv_sqrt_w.asDiagonal();
  r.stationarity = (g_z * z - rows_z.transpose() * lam - nu_z).norm();
  Eigen::VectorXd levels = prob.levels;
  levels[h] = e;
  const Eigen::VectorXd slack = prob.rows * inner.coords - levels;
  double comp = 0.0;
  double infeas = 0.0;
  for (int t = 0; t <= h; ++t) {
    if (t == h && mean_equality) {
      infeas = std::max(infeas, std::abs(slack[t]));
    } else {
      comp = std::max(comp, std::abs(lam[t] * slack[t]));
      infeas = std::max(infeas, -slack[t]);
    }
  }
  for (int j = 0; j < d; ++j) {
    comp = std::max(comp, std::abs(nu_z[j] * z[j]));
    infeas = std::max(infeas, -z[j]);
  }
  r.complementarity = comp;
  r.infeasibility = std::max(0.0, infeas);
  const Eigen::VectorXd& c = inner.coords;
  const Eigen::MatrixXd phi = leaf_design(tree, book, d);
  const Eigen::VectorXd p = tree.layer_probabilities(tree.horizon());
  const Eigen::VectorXd u = phi * c;
  r.mean = u.dot(p);
  r.second_moment = u.cwiseAbs2().dot(p);
  r.variance = (u.array() - r.mean).square().matrix().dot(p);
  r.qp_iterations = inner.qp.iterations;
  return r;
}

}  // namespace

Eigen::MatrixXd leaf_design(const ScenarioTree& tree, const ContractBook& book, int max_dim) {
  check_dim(tree, max_dim);
  const int n = tree.n_contracts();
  const auto off = stage_offsets(tree);
  const auto leaves = tree.layer(tree.horizon());
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(leaves.size()), coordinate_count(tree));
  for (int k = 0; k <= tree.t_bar(); ++k) {
    const auto& u = final_utility(book, k).values();
    for (std::size_t r = 0; r < leaves.size(); ++r) {
      const int anc = tree.position(tree.ancestor(leaves[r], k));
      for (int i = 0; i < n; ++i) {
        phi(static_cast<Eigen::Index>(r), column(off, n, k, anc, i)) = u(static_cast<Eigen::Index>(r), i);
      }
    }
  }
  return phi;
}

Eigen::MatrixXd dense_gram(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, int max_dim) {
  const Eigen::MatrixXd phi = leaf_design(tree, book, max_dim);
  const Eigen::VectorXd p = tree.layer_probabilities(tree.horizon());
  Eigen::MatrixXd g = phi.transpose() * p.asDiagonal() * phi;
  if (kind == OperatorKind::B) {
    const Eigen::VectorXd mean_row = phi.transpose() * p;
    g -= mean_row * mean_row.transpose();
  }
  return 0.5 * (g + g.transpose());
}

DenseProblem build_dense_problem(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                 const ConstraintConfig& config, int max_dim) {
  validate_config(tree, config);
  DenseProblem prob;
  prob.kind = kind;
  prob.gram = dense_gram(kind, tree, book, max_dim);
  prob.weights = coordinate_weights(tree);
  const int h = tree.horizon();
  prob.rows.resize(h + 1, coordinate_count(tree));
  for (int t = 0; t < h; ++t) {
    const double ct = config.c[static_cast<std::size_t>(t)];
    prob.rows.row(t) = (expectation_row(tree, book, t + 1) - (1.0 + ct) * expectation_row(tree, book, t)).transpose();
  }
  prob.rows.row(h) = expectation_row(tree, book, h).transpose();
  prob.levels = constraint_levels(config);
  return prob;
}

Eigen::VectorXd dense_solve_linear(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                   const Eigen::VectorXd& xi_coords, double lambda, int max_dim) {
  const Eigen::MatrixXd g = dense_gram(kind, tree, book, max_dim);
  const Eigen::VectorXd w = coordinate_weights(tree);
  if (xi_coords.size() != g.rows()) throw InputError("dense_solve_linear: right-hand side has wrong length");
  const Eigen::MatrixXd shifted = g - lambda * Eigen::MatrixXd(w.asDiagonal());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(shifted);
  if (!lu.isInvertible()) throw NumericalError("dense_solve_linear: shifted system is singular");
  return lu.solve(w.cwiseProduct(xi_coords));
}

std::vector<double> dense_spectrum(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                   int max_dim) {
  const Eigen::MatrixXd g = dense_gram(kind, tree, book, max_dim);
  const Weighted wt = weighting(coordinate_weights(tree));
  const Eigen::MatrixXd c = wt.inv_sqrt_w.asDiagonal() * g * wt.inv_sqrt_w.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

OracleResult dense_qp(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                      ProblemForm form, int max_dim) {
  if (form == ProblemForm::FixedMean) {
    const DenseProblem prob = build_dense_problem(OperatorKind::A, tree, book, config, max_dim);
    const InnerSolve s = solve_weighted(prob, true, config.e);
    if (s.qp.status != QpStatus::Optimal) throw Infeasible("fixed-mean problem has an empty constraint set");
    return certify(tree, book, prob, s, form, true, config.e);
  }
  const DenseProblem prob = build_dense_problem(OperatorKind::B, tree, book, config, max_dim);
  if (form == ProblemForm::MinVariance) {
    const InnerSolve s = solve_weighted(prob, false, config.e);
    if (s.qp.status != QpStatus::Optimal) throw Infeasible("min-variance problem has an empty constraint set");
    return certify(tree, book, prob, s, form, false, config.e);
  }

  if (!config.sigma2) throw InputError("max-mean form requires sigma2");
  const double sigma2 = *config.sigma2;
  const Weighted wt = weighting(prob.weights);
  const Eigen::MatrixXd g_z = wt.inv_sqrt_w.asDiagonal() * prob.gram * wt.inv_sqrt_w.asDiagonal();
  auto variance = [&](double e) -> std::optional<double> {
    const InnerSolve s = solve_weighted(prob, false, e);
    if (s.qp.status != QpStatus::Optimal) return std::nullopt;
    return s.qp.x.dot(g_z * s.qp.x);
  };
  const InnerSolve least = solve_weighted(prob, false, 0.0);
  if (least.qp.status != QpStatus::Optimal) throw Infeasible("max-mean problem: profitability constraints are empty");
  // The least-variance point may already carry a positive mean.
  const double e_start = std::max(0.0, (prob.rows.row(prob.rows.rows() - 1) * least.coords)(0));
  const detail::MeanSearch found = detail::search_mean_level(sigma2, e_start, variance);
  const InnerSolve s = solve_weighted(prob, false, found.e);
  OracleResult r = certify(tree, book, prob, s, form, false, found.e);
  r.bisection_steps = found.steps;
  return r;
}

}  // namespace reinsqp

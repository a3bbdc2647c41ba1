#include "reinsqp/multipliers.hpp"

#include "reinsqp/dual_active_set.hpp"
#include "reinsqp/errors.hpp"
#include "reinsqp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reinsqp {

Eigen::VectorXd MultiplierSet::stacked() const {
  Eigen::VectorXd all(lambda.size() + 1);
  all.head(lambda.size()) = lambda;
  all[lambda.size()] = mu;
  return all;
}

MultiplierSet MultiplierSet::from_stacked(const Eigen::VectorXd& all, PortfolioProcess nu) {
  if (all.size() < 1) throw InputError("stacked multipliers must contain mu");
  MultiplierSet m;
  m.lambda = all.head(all.size() - 1);
  m.mu = all[all.size() - 1];
  m.nu = std::move(nu);
  return m;
}

std::string_view to_string(ProblemForm form) {
  switch (form) {
    case ProblemForm::MinVariance: return "min-variance";
    case ProblemForm::FixedMean: return "fixed-mean";
    case ProblemForm::MaxMean: return "max-mean";
  }
  return "min-variance";
}

ProblemForm parse_form(std::string_view text) {
  if (text == "min-variance") return ProblemForm::MinVariance;
  if (text == "fixed-mean") return ProblemForm::FixedMean;
  if (text == "max-mean") return ProblemForm::MaxMean;
  throw InputError("unknown problem form '" + std::string(text) + "'");
}

OperatorKind operator_for(ProblemForm form) {
  return form == ProblemForm::FixedMean ? OperatorKind::A : OperatorKind::B;
}

// --- CInverse -------------------------------------------------------------

CInverse::CInverse(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, int max_dim)
    : kind_(kind), tree_(tree), book_(book), max_dim_(max_dim) {
  try {
    structured_ = std::make_unique<StructuredSolver>(kind, tree, book, 0.0);
  } catch (const SingularPivot&) {
    dense_fallback_ = true;
  }
}

PortfolioProcess CInverse::dense_solve(const PortfolioProcess& xi) const {
  dense_fallback_ = true;
  return PortfolioProcess::from_coordinates(
      tree_, dense_solve_linear(kind_, tree_, book_, xi.coordinates(), 0.0, max_dim_));
}

PortfolioProcess CInverse::solve(const PortfolioProcess& xi) const {
  if (!structured_) return dense_solve(xi);
  SolveResult r = structured_->solve(xi);
  worst_residual_ = std::max(worst_residual_, r.residual);
  if (!r.ok) return dense_solve(xi);
  return std::move(r.eta);
}

// --- L matrix ---------------------------------------------------------------

Eigen::VectorXd LGram::r(const ScenarioTree& tree, const CInverse& cinv, const PortfolioProcess& nu) const {
  const PortfolioProcess c_nu = cinv.solve(nu);
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) out[static_cast<Eigen::Index>(t)] = inner_product(tree, rows[t], c_nu);
  return out;
}

LGram l_gram(const ScenarioTree& tree, const CInverse& cinv, const Representers& reps, double cond_max) {
  LGram g;
  g.rows = reps.constraint_rows();
  const auto n = static_cast<Eigen::Index>(g.rows.size());
  for (const auto& row : g.rows) g.c_inv_rows.push_back(cinv.solve(row));
  g.l_inv.resize(n, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index s = 0; s < n; ++s) {
      g.l_inv(t, s) = inner_product(tree, g.rows[static_cast<std::size_t>(t)], g.c_inv_rows[static_cast<std::size_t>(s)]);
    }
  }
  g.l_inv = 0.5 * (g.l_inv + g.l_inv.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.l_inv, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()[0];
  const double hi = es.eigenvalues()[n - 1];
  g.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  g.near_singular = !(g.condition <= cond_max);
  return g;
}

Eigen::VectorXd multiplier_lcp(const Eigen::MatrixXd& l_inv, const Eigen::VectorXd& q,
                               const std::vector<bool>& free_mask, bool near_singular) {
  if (!near_singular) return nonneg_qp(l_inv, q, free_mask).plus;
  const auto n = l_inv.rows();
  const double scale = std::max(1e-300, l_inv.diagonal().cwiseAbs().maxCoeff());
  const double eps = 1e-8 * std::max(scale, 1e-12);
  const Eigen::MatrixXd reg = l_inv + eps * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < 20000; ++it) {
    const Eigen::VectorXd next = nonneg_qp(reg, q + eps * lam, free_mask).plus;
    const double step = (next - lam).norm();
    if (it >= 2 && step > 0.0) {
      // A step d >= 0 (on the sign-constrained rows) with L d = 0 and q.d > 0 is a ray
      // along which the objective is unbounded: the constraint rows are inconsistent.
      const Eigen::VectorXd d = (next - lam) / step;
      bool cone = true;
      for (Eigen::Index i = 0; i < n; ++i) cone = cone && (free_mask[static_cast<std::size_t>(i)] || d[i] >= -1e-9);
      if (cone && (l_inv * d).norm() <= 1e-9 * scale && q.dot(d) > 1e-12 * (1.0 + q.norm())) {
        throw NumericalError("multiplier problem unbounded along a null direction of L");
      }
    }
    lam = next;
    if (step <= 1e-14 * (1.0 + lam.norm())) break;
  }
  return lam;
}

// --- deterministic solution -----------------------------------------------

DeterministicSolution deterministic_solution(const ScenarioTree& tree, const ContractBook& book,
                                             const ConstraintConfig& config, ProblemForm form) {
  const int tb = tree.t_bar();
  const int n = tree.n_contracts();
  const int dim = (tb + 1) * n;
  const int h = tree.horizon();
  const Representers reps = representers(tree, book, config);
  const Eigen::VectorXd p = tree.layer_probabilities(h);

  DeterministicSolution det;
  det.gram.resize(dim, dim);
  std::vector<Eigen::VectorXd> means;
  for (int k = 0; k <= tb; ++k) means.push_back(final_utility(book, k).values().transpose() * p);
  for (int k = 0; k <= tb; ++k) {
    for (int l = 0; l <= tb; ++l) {
      Eigen::MatrixXd block = final_utility(book, k).values().transpose() * p.asDiagonal() *
                              final_utility(book, l).values();
      if (operator_for(form) == OperatorKind::B) block -= means[k] * means[l].transpose();
      det.gram.block(k * n, l * n, n, n) = block;
    }
  }
  det.gram = 0.5 * (det.gram + det.gram.transpose());
  const auto rows = reps.constraint_rows();
  det.rows.resize(h + 1, dim);
  for (int t = 0; t <= h; ++t) {
    for (int k = 0; k <= tb; ++k) {
      det.rows.block(t, k * n, 1, n) = expectation(tree, rows[static_cast<std::size_t>(t)].stage(k)).transpose();
    }
  }
  const Eigen::VectorXd levels = constraint_levels(config);

  const bool mean_eq = form == ProblemForm::FixedMean;
  const int n_lin = mean_eq ? h : h + 1;
  DenseQp qp;
  qp.g = det.gram;
  qp.g0 = Eigen::VectorXd::Zero(dim);
  qp.a_in.resize(n_lin + dim, dim);
  qp.b_in.resize(n_lin + dim);
  qp.a_in.topRows(n_lin) = det.rows.topRows(n_lin);
  qp.b_in.head(n_lin) = levels.head(n_lin);
  qp.a_in.bottomRows(dim) = Eigen::MatrixXd::Identity(dim, dim);
  qp.b_in.tail(dim).setZero();
  if (mean_eq) {
    qp.a_eq = det.rows.row(h);
    qp.b_eq = Eigen::VectorXd::Constant(1, levels[h]);
  } else {
    qp.a_eq.resize(0, dim);
    qp.b_eq.resize(0);
  }
  const QpSolution sol = solve_dense_qp(qp);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(h + 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(dim);
  det.feasible = sol.status == QpStatus::Optimal;
  if (det.feasible) {
    x = sol.x;
    lam.head(n_lin) = sol.y_in.head(n_lin);
    if (mean_eq) lam[h] = sol.y_eq[0];
    nu = sol.y_in.tail(dim);
    const Eigen::VectorXd slack = det.rows * x - levels;
    for (int t = 0; t < n_lin; ++t) det.complementarity = std::max(det.complementarity, std::abs(lam[t] * slack[t]));
    for (int j = 0; j < dim; ++j) det.complementarity = std::max(det.complementarity, std::abs(nu[j] * x[j]));
  }
  det.eta = PortfolioProcess::deterministic(tree, x);
  det.multipliers = MultiplierSet::from_stacked(lam, PortfolioProcess::deterministic(tree, nu));
  return det;
}

// --- KKT --------------------------------------------------------------------

double KktReport::max_residual() const {
  for (double r : {stationarity, sign_violation, complementarity, infeasibility}) {
    if (std::isnan(r)) return std::numeric_limits<double>::infinity();
  }
  return std::max({stationarity, sign_violation, complementarity, infeasibility});
}

KktReport kkt_verify(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                     const PortfolioProcess& eta, const MultiplierSet& mult, ProblemForm form, double tol_kkt) {
  const OperatorKind kind = operator_for(form);
  const Representers reps = representers(tree, book, config);
  const int h = tree.horizon();
  if (mult.lambda.size() != h) throw InputError("multiplier vector has wrong length");
  check_portfolio(tree, mult.nu);

  KktReport k;
  k.tol = tol_kkt;
  const PortfolioProcess c_eta = apply(kind, tree, book, eta);
  PortfolioProcess resid = c_eta - mult.mu * reps.m - mult.nu;
  for (int t = 0; t < h; ++t) resid -= mult.lambda[t] * reps.l[static_cast<std::size_t>(t)];
  k.stationarity_abs = h_norm(tree, resid);
  k.stationarity = k.stationarity_abs / std::max(1.0, h_norm(tree, c_eta));

  const bool mean_free = form == ProblemForm::FixedMean;
  double sign = 0.0;
  for (int t = 0; t < h; ++t) sign = std::max(sign, -mult.lambda[t]);
  if (!mean_free) sign = std::max(sign, -mult.mu);
  sign = std::max(sign, -mult.nu.min_value());
  sign = std::max(sign, -eta.min_value());
  k.sign_violation = std::max(0.0, sign);

  const ConstraintReport cr = evaluate_constraints(tree, book, eta, config);
  double comp = 0.0;
  double infeas = 0.0;
  for (int t = 0; t < h; ++t) {
    const double s = cr.roe_slack[static_cast<std::size_t>(t)];
    comp = std::max(comp, std::abs(mult.lambda[t] * s));
    infeas = std::max(infeas, -s);
  }
  if (mean_free) {
    infeas = std::max(infeas, std::abs(cr.mean_slack));
  } else {
    comp = std::max(comp, std::abs(mult.mu * cr.mean_slack));
    infeas = std::max(infeas, -cr.mean_slack);
  }
  for (int s = 0; s <= tree.t_bar(); ++s) {
    const Eigen::VectorXd p = tree.layer_probabilities(s);
    const Eigen::MatrixXd prod = mult.nu.stage(s).values().cwiseProduct(eta.stage(s).values()).cwiseAbs();
    comp = std::max(comp, (p.asDiagonal() * prod).maxCoeff());
  }
  k.complementarity = comp;
  k.infeasibility = std::max(0.0, infeas);
  k.converged = k.max_residual() <= tol_kkt;
  return k;
}

// --- approximation cycle --------------------------------------------------

MultiplierContext::MultiplierContext(const ScenarioTree& tree, const ContractBook& book,
                                     const ConstraintConfig& config, ProblemForm form, int max_dim)
    : tree_(tree),
      book_(book),
      config_(config),
      form_(form),
      moments_(moment_tables(tree, book)),
      reps_(reinsqp::representers(tree, book, config)),
      cinv_(operator_for(form), tree, book, max_dim),
      gram_(l_gram(tree, cinv_, reps_)) {}

std::vector<bool> MultiplierContext::free_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(tree_.horizon() + 1), false);
  if (form_ == ProblemForm::FixedMean) mask.back() = true;
  return mask;
}

AdaptedVariable theta(const MultiplierContext& ctx, int k, int sign, const Eigen::VectorXd& stacked_lambda,
                      const PortfolioProcess& eta) {
  const ScenarioTree& tree = ctx.tree();
  const auto& rows = ctx.gram().rows;
  if (stacked_lambda.size() != static_cast<Eigen::Index>(rows.size())) {
    throw InputError("theta: multiplier vector has wrong length");
  }
  AdaptedVariable arg = AdaptedVariable::zeros(tree, k, tree.n_contracts());
  for (std::size_t t = 0; t < rows.size(); ++t) arg += stacked_lambda[static_cast<Eigen::Index>(t)] * rows[t].stage(k);
  if (ctx.kind() == OperatorKind::B) {
    const Eigen::VectorXd shift = (ctx.moments().m_a[k] - ctx.moments().m_b[k]) * expectation(tree, eta.stage(k));
    arg.values().rowwise() += shift.transpose();
  }
  for (int l = 0; l <= tree.t_bar(); ++l) {
    if (l != k) arg -= block_apply(ctx.kind(), tree, ctx.book(), k, l, eta.stage(l));
  }
  const Eigen::MatrixXd& ma = ctx.moments().m_a[k];
  Eigen::MatrixXd out(arg.rows(), arg.dim());
  for (int r = 0; r < arg.rows(); ++r) {
    const NonnegQpResult f = nonneg_qp(ma, arg.values().row(r).transpose());
    out.row(r) = (sign >= 0 ? f.plus : f.minus).transpose();
  }
  return {k, std::move(out)};
}

namespace {

PortfolioProcess combine(const MultiplierContext& ctx, const Eigen::VectorXd& stacked, const PortfolioProcess& nu) {
  PortfolioProcess rhs = nu;
  const auto& rows = ctx.gram().rows;
  for (std::size_t t = 0; t < rows.size(); ++t) rhs += stacked[static_cast<Eigen::Index>(t)] * rows[t];
  return rhs;
}

}  // namespace

Approximation approximation_step(const MultiplierContext& ctx, const PortfolioProcess& nu_prev) {
  const LGram& g = ctx.gram();
  Approximation a;
  const Eigen::VectorXd q = ctx.levels() - g.r(ctx.tree(), ctx.c_inverse(), nu_prev);
  a.lambda = multiplier_lcp(g.l_inv, q, ctx.free_mask(), g.near_singular);
  a.eta_bar = ctx.c_inverse().solve(combine(ctx, a.lambda, nu_prev));
  std::vector<AdaptedVariable> nu_stages;
  std::vector<AdaptedVariable> eta_stages;
  for (int k = 0; k <= ctx.tree().t_bar(); ++k) {
    nu_stages.push_back(theta(ctx, k, -1, a.lambda, a.eta_bar));
    eta_stages.push_back(theta(ctx, k, +1, a.lambda, a.eta_bar));
  }
  a.nu = PortfolioProcess(std::move(nu_stages));
  a.eta_hat = PortfolioProcess(std::move(eta_stages));
  return a;
}

Approximation first_approximation(const MultiplierContext& ctx, const DeterministicSolution& det) {
  return approximation_step(ctx, det.multipliers.nu);
}

PortfolioProcess assemble_solution(const MultiplierContext& ctx, const MultiplierSet& mult) {
  return ctx.c_inverse().solve(combine(ctx, mult.stacked(), mult.nu));
}

IterationResult iterate(const MultiplierContext& ctx, const Approximation& first, int max_iter, double tol_kkt) {
  IterationResult res;
  auto verify = [&](const Approximation& a) {
    return kkt_verify(ctx.tree(), ctx.book(), ctx.config(), a.eta_hat, a.multipliers(), ctx.form(), tol_kkt);
  };
  res.last = first;
  res.kkt = verify(first);
  res.history.push_back(res.kkt.max_residual());
  int increases = 0;
  int records = 0;  // new highs since the last new best
  double best = res.history.back();
  double worst = res.history.back();
  while (!res.kkt.converged && res.iterations < max_iter) {
    Approximation next = approximation_step(ctx, res.last.nu);
    const KktReport kkt = verify(next);
    ++res.iterations;
    const double r = kkt.max_residual();
    if (!std::isfinite(r)) {
      // overflow: keep the last finite iterate
      res.non_monotone = true;
      res.diverging = true;
      break;
    }
    const double prev = res.history.back();
    res.history.push_back(r);
    res.last = std::move(next);
    res.kkt = kkt;
    if (r < best * (1.0 - 1e-9)) {
      best = r;
      records = 0;
    }
    if (r > worst) {
      worst = r;
      ++records;
    }
    if (r > prev) {
      res.non_monotone = true;
      if (++increases >= 3 || records >= 3) {
        res.diverging = true;
        break;
      }
    } else {
      increases = 0;
    }
  }
  res.converged = res.kkt.converged;
  return res;
}

}  // namespace reinsqp

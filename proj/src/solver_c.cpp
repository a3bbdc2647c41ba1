#include "reinsqp/solver_c.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reinsqp {

namespace {

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double lo = s[s.size() - 1];
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return s[0] / lo;
}

std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

/// Solves every row of x (as a column vector) against `pivot`.
Eigen::MatrixXd solve_rows(const Eigen::MatrixXd& pivot, const Eigen::MatrixXd& x, int level, double cond_max) {
  const double cond = condition_number(pivot);
  if (!(cond <= cond_max)) throw SingularPivot(level, cond);
  return pivot.partialPivLu().solve(x.transpose()).transpose();
}

/// Running sums S(k) = sum_{r>n} d_r f_r^2 N_r(k) while walking n downwards.
struct Recursion {
  const MomentTables& mt;
  double lambda;
  std::vector<Eigen::MatrixXd> s_a;
  std::vector<Eigen::MatrixXd> s_b;
  double f = 1.0;
  double g = 0.0;

  Recursion(const MomentTables& moments, double lam) : mt(moments), lambda(lam) {
    const int n = mt.n_contracts();
    s_a.assign(mt.t_bar() + 1, Eigen::MatrixXd::Zero(n, n));
    s_b.assign(mt.t_bar() + 1, Eigen::MatrixXd::Zero(n, n));
  }

  Eigen::MatrixXd level_a(int k) const { return mt.m_a[k] - s_a[k]; }
  Eigen::MatrixXd level_b(int k) const { return mt.m_b[k] - s_b[k]; }

  /// Consumes level n: returns d_n and advances f, g and the sums.
  double step(int n, double cond_max) {
    const int dim = mt.n_contracts();
    const Eigen::MatrixXd pivot = level_a(n) - lambda * Eigen::MatrixXd::Identity(dim, dim);
    const double cond = condition_number(pivot);
    if (!(cond <= cond_max)) throw SingularPivot(n, cond);
    const Eigen::VectorXd& m = mt.mean_u[n];
    const double d = m.dot(pivot.partialPivLu().solve(m));
    const double w = d * f * f;
    for (int k = 0; k < n; ++k) {
      s_a[k] += w * mt.n_a[n][k];
      s_b[k] += w * mt.n_b[n][k];
    }
    g += w;
    f *= 1.0 - d * f;
    return d;
  }
};

}  // namespace

Eigen::MatrixXd EliminationCoefficients::mean_pivot(int n, int k) const {
  return D[n][k] - (1.0 - g[n]) * mean_u[k] * mean_u[k].transpose();
}

EliminationCoefficients elimination_coefficients(const MomentTables& moments, double lambda, double cond_max) {
  const int tb = moments.t_bar();
  const int dim = moments.n_contracts();
  const Eigen::MatrixXd shift = lambda * Eigen::MatrixXd::Identity(dim, dim);
  EliminationCoefficients c;
  c.lambda = lambda;
  c.mean_u = moments.mean_u;
  c.d.resize(tb + 1);
  c.f.resize(tb + 1);
  c.g.resize(tb + 1);
  c.D.resize(tb + 1);
  Recursion rec(moments, lambda);
  for (int n = tb; n >= 0; --n) {
    c.f[n] = rec.f;
    c.g[n] = rec.g;
    for (int k = 0; k <= n; ++k) c.D[n].push_back(rec.level_a(k) - shift);
    c.d[n] = rec.step(n, cond_max);
  }
  c.f_final = rec.f;
  c.g_final = rec.g;
  return c;
}

SpectralSets spectral_sets(const MomentTables& moments, double lambda, double cond_max) {
  const int tb = moments.t_bar();
  SpectralSets s;
  s.lambda = lambda;
  s.levels_a.resize(tb + 1);
  s.levels_b.resize(tb + 1);
  Recursion rec(moments, lambda);
  for (int n = tb; n >= 0; --n) {
    s.levels_a[n] = symmetric_eigenvalues(rec.level_a(n));
    s.levels_b[n] = symmetric_eigenvalues(rec.level_b(n));
    if (n > 0) rec.step(n, cond_max);
  }
  for (int n = 0; n <= tb; ++n) {
    s.sigma_a.insert(s.sigma_a.end(), s.levels_a[n].begin(), s.levels_a[n].end());
    s.sigma_b.insert(s.sigma_b.end(), s.levels_b[n].begin(), s.levels_b[n].end());
  }
  s.sigma_b.insert(s.sigma_b.end(), s.sigma_a.begin(), s.sigma_a.end());
  std::sort(s.sigma_a.begin(), s.sigma_a.end());
  std::sort(s.sigma_b.begin(), s.sigma_b.end());
  return s;
}

namespace {

/// nu_i(lambda) - lambda for every sorted eigenvalue branch of every level matrix
/// the sigma set of `kind` draws on, recursion evaluated at lambda. Empty when a
/// pivot is singular there (lambda is then itself in the set).
std::vector<double> branch_gaps(OperatorKind kind, const MomentTables& moments, double lambda, double cond_max) {
  std::vector<double> out;
  Recursion rec(moments, lambda);
  for (int n = moments.t_bar(); n >= 0; --n) {
    for (double ev : symmetric_eigenvalues(rec.level_a(n))) out.push_back(ev - lambda);
    if (kind == OperatorKind::B) {
      for (double ev : symmetric_eigenvalues(rec.level_b(n))) out.push_back(ev - lambda);
    }
    if (n == 0) break;
    try {
      rec.step(n, cond_max);
    } catch (const SingularPivot&) {
      return {};
    }
  }
  return out;
}

bool brackets_member(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0 || b[i] == 0.0 || (a[i] < 0.0) != (b[i] < 0.0)) return true;
  }
  return false;
}

}  // namespace

double sigma_distance(OperatorKind kind, const MomentTables& moments, double lambda_star, double cond_max) {
  // Sorted eigenvalues are continuous in lambda away from singular pivots, so a sign
  // change of a branch gap on [l - h, l + h] means a member of the set (a fixed point
  // nu(l) = l, or a singular pivot) lies within h. The returned h is an upper bound
  // at most twice the true distance. The pointwise gap |nu(l*) - l*| is not used: it
  // is amplified without bound next to singular pivots.
  const std::vector<double> centre = branch_gaps(kind, moments, lambda_star, cond_max);
  if (centre.empty()) return 0.0;
  for (double g : centre) {
    if (g == 0.0) return 0.0;
  }
  const double scale = 1.0 + std::abs(lambda_star);
  for (double h = 1e-16 * scale; h <= 1e4 * scale; h *= 2.0) {
    if (brackets_member(centre, branch_gaps(kind, moments, lambda_star - h, cond_max)) ||
        brackets_member(centre, branch_gaps(kind, moments, lambda_star + h, cond_max))) {
      return h;
    }
  }
  return std::numeric_limits<double>::infinity();
}

AdaptedVariable diag_block_inverse(OperatorKind kind, const ScenarioTree& tree, const EliminationCoefficients& coeffs,
                                   int n, const AdaptedVariable& x, double cond_max) {
  const int k = x.depth();
  if (n < 0 || n > coeffs.t_bar() || k > n) {
    throw InputError("diag_block_inverse: need depth " + std::to_string(k) + " <= level " + std::to_string(n));
  }
  check_adapted(tree, x, static_cast<int>(coeffs.mean_u[k].size()));
  if (kind == OperatorKind::A) return {k, solve_rows(coeffs.D[n][k], x.values(), n, cond_max)};
  const Eigen::VectorXd mean = expectation(tree, x);
  const Eigen::MatrixXd centered = x.values().rowwise() - mean.transpose();
  Eigen::MatrixXd out = solve_rows(coeffs.D[n][k], centered, n, cond_max);
  const Eigen::VectorXd mean_part = solve_rows(coeffs.mean_pivot(n, k), mean.transpose(), n, cond_max).transpose();
  out.rowwise() += mean_part.transpose();
  return {k, std::move(out)};
}

PortfolioProcess forward_eliminate(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                   const EliminationCoefficients& coeffs, const PortfolioProcess& xi) {
  check_portfolio(tree, xi);
  PortfolioProcess out = xi;
  for (int n = coeffs.t_bar(); n >= 1; --n) {
    const AdaptedVariable y = diag_block_inverse(kind, tree, coeffs, n, out.stage(n));
    for (int k = 0; k < n; ++k) {
      out.stage(k) -= coeffs.f[n] * block_apply(kind, tree, book, k, n, y);
    }
  }
  return out;
}

PortfolioProcess back_substitute(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                 const EliminationCoefficients& coeffs, const PortfolioProcess& xi0) {
  check_portfolio(tree, xi0);
  PortfolioProcess eta = PortfolioProcess::zeros(tree);
  for (int k = 0; k <= coeffs.t_bar(); ++k) {
    AdaptedVariable rhs = xi0.stage(k);
    for (int l = 0; l < k; ++l) rhs -= coeffs.f[k] * block_apply(kind, tree, book, k, l, eta.stage(l));
    eta.stage(k) = diag_block_inverse(kind, tree, coeffs, k, rhs);
  }
  return eta;
}

StructuredSolver::StructuredSolver(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                                   double lambda, double cond_max)
    : kind_(kind), tree_(tree), book_(book),
      coeffs_(elimination_coefficients(moment_tables(tree, book), lambda, cond_max)) {
  for (int n = 0; n <= coeffs_.t_bar() && kind == OperatorKind::B; ++n) {
    const double cond = condition_number(coeffs_.mean_pivot(n, n));
    if (!(cond <= cond_max)) throw SingularPivot(n, cond);
  }
}

SolveResult StructuredSolver::solve(const PortfolioProcess& xi) const {
  SolveResult r;
  r.eta = back_substitute(kind_, tree_, book_, coeffs_, forward_eliminate(kind_, tree_, book_, coeffs_, xi));
  PortfolioProcess residual = apply(kind_, tree_, book_, r.eta) - coeffs_.lambda * r.eta - xi;
  const double scale = h_norm(tree_, xi);
  const double abs_res = h_norm(tree_, residual);
  r.residual = scale > 0.0 ? abs_res / scale : abs_res;
  r.ok = r.residual <= kSolveResidualTol;
  return r;
}

SolveResult solve(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, const PortfolioProcess& xi,
                  double lambda) {
  return StructuredSolver(kind, tree, book, lambda).solve(xi);
}

}  // namespace reinsqp

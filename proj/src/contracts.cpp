#include "reinsqp/contracts.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace reinsqp {

ContractBook::ContractBook(const ScenarioTree& tree)
    : t_bar_(tree.t_bar()), horizon_(tree.horizon()), n_(tree.n_contracts()) {
  u_.resize(t_bar_ + 1);
  for (int k = 0; k <= t_bar_; ++k) {
    for (int t = 0; t <= horizon_; ++t) u_[k].push_back(AdaptedVariable::zeros(tree, t, n_));
  }
}

ContractBook::ContractBook(const ScenarioTree& tree, std::span<const UtilityEntry> entries) : ContractBook(tree) {
  std::set<std::tuple<int, int, NodeId>> seen;
  for (const auto& e : entries) {
    if (e.issue_time < 0 || e.issue_time > t_bar_) {
      throw InputError("utility issue_time " + std::to_string(e.issue_time) + " outside [0, T_bar]");
    }
    if (e.contract < 0 || e.contract >= n_) {
      throw InputError("utility contract " + std::to_string(e.contract) + " outside [0, N)");
    }
    if (!tree.contains(e.node)) throw InputError("utility references unknown node " + std::to_string(e.node));
    if (!std::isfinite(e.value)) throw InputError("utility value is not finite");
    if (!seen.emplace(e.issue_time, e.contract, e.node).second) {
      throw InputError("duplicate utility entry (issue_time " + std::to_string(e.issue_time) + ", contract " +
                       std::to_string(e.contract) + ", node " + std::to_string(e.node) + ")");
    }
    const int idx = tree.index_of(e.node);
    const int t = tree.depth(idx);
    if (t <= e.issue_time && e.value != 0.0) {
      throw InputError("utility u(k,t) must vanish for t <= k (issue_time " + std::to_string(e.issue_time) +
                       ", node " + std::to_string(e.node) + ")");
    }
    u_[e.issue_time][t].values()(tree.position(idx), e.contract) = e.value;
  }
}

const AdaptedVariable& ContractBook::utility(int issue_time, int t) const {
  if (issue_time < 0 || issue_time > t_bar_ || t < 0 || t > horizon_) {
    throw InputError("utility index (" + std::to_string(issue_time) + ", " + std::to_string(t) + ") out of range");
  }
  return u_[issue_time][t];
}

void ContractBook::set_utility(int issue_time, int t, AdaptedVariable value) {
  if (issue_time < 0 || issue_time > t_bar_ || t <= issue_time || t > horizon_) {
    throw InputError("cannot set utility (" + std::to_string(issue_time) + ", " + std::to_string(t) + ")");
  }
  if (value.depth() != t || value.rows() != u_[issue_time][t].rows() || value.dim() != n_) {
    throw InputError("utility value has wrong shape");
  }
  u_[issue_time][t] = std::move(value);
}

std::vector<UtilityEntry> ContractBook::entries(const ScenarioTree& tree) const {
  std::vector<UtilityEntry> out;
  for (int k = 0; k <= t_bar_; ++k) {
    for (int t = k + 1; t <= horizon_; ++t) {
      const auto nodes = tree.layer(t);
      for (std::size_t r = 0; r < nodes.size(); ++r) {
        for (int i = 0; i < n_; ++i) {
          const double v = u_[k][t].values()(static_cast<Eigen::Index>(r), i);
          if (v != 0.0) out.push_back({k, i, tree.id(nodes[r]), v});
        }
      }
    }
  }
  return out;
}

const AdaptedVariable& final_utility(const ContractBook& book, int k) {
  if (k < 0 || k > book.t_bar()) throw InputError("issue time " + std::to_string(k) + " outside [0, T_bar]");
  return book.utility(k, book.horizon());
}

namespace {

/// sum_v p_v x_v y_v^T over one layer.
Eigen::MatrixXd weighted_outer(const Eigen::VectorXd& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  return x.transpose() * p.asDiagonal() * y;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

MomentTables moment_tables(const ScenarioTree& tree, const ContractBook& book) {
  MomentTables mt;
  const int tb = tree.t_bar();
  const Eigen::VectorXd p_leaf = tree.layer_probabilities(tree.horizon());
  for (int k = 0; k <= tb; ++k) {
    const auto& u = final_utility(book, k).values();
    const Eigen::VectorXd mean = u.transpose() * p_leaf;
    const Eigen::MatrixXd centered = u.rowwise() - mean.transpose();
    mt.mean_u.push_back(mean);
    mt.m_a.push_back(weighted_outer(p_leaf, u, u));
    mt.m_b.push_back(weighted_outer(p_leaf, centered, centered));
  }
  mt.n_a.resize(tb + 1);
  mt.n_b.resize(tb + 1);
  for (int n = 0; n <= tb; ++n) {
    const Eigen::VectorXd p_n = tree.layer_probabilities(n);
    for (int k = 0; k <= tb; ++k) {
      const auto cond = conditional_expectation(tree, final_utility(book, k), n).values();
      const Eigen::MatrixXd centered = cond.rowwise() - mt.mean_u[k].transpose();
      mt.n_a[n].push_back(weighted_outer(p_n, cond, cond));
      mt.n_b[n].push_back(weighted_outer(p_n, centered, centered));
    }
  }
  return mt;
}

std::vector<HypothesisCheck> check_h1(const ScenarioTree& tree, const ContractBook& book, double tol_mom) {
  std::vector<HypothesisCheck> out;
  const int n = tree.n_contracts();
  for (int k = 0; k <= tree.t_bar(); ++k) {
    HypothesisCheck check;
    const auto& u = final_utility(book, k);
    // Products u_i u_j as one N*N-column variable on the leaves.
    Eigen::MatrixXd prod(u.rows(), n * n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) prod.col(i * n + j) = u.values().col(i).cwiseProduct(u.values().col(j));
    }
    const AdaptedVariable prod_var(u.depth(), std::move(prod));
    const auto cond1 = conditional_expectation(tree, u, k);
    const auto cond2 = conditional_expectation(tree, prod_var, k);
    const Eigen::VectorXd m1 = expectation(tree, u);
    const Eigen::VectorXd m2 = expectation(tree, prod_var);
    const auto nodes = tree.layer(k);
    for (int r = 0; r < cond1.rows(); ++r) {
      const double v1 = (cond1.values().row(r).transpose() - m1).lpNorm<Eigen::Infinity>();
      const double v2 = (cond2.values().row(r).transpose() - m2).lpNorm<Eigen::Infinity>();
      const double v = std::max(v1, v2);
      if (v > check.worst) {
        check.worst = v;
        check.location = "k=" + std::to_string(k) + " node=" + std::to_string(tree.id(nodes[r]));
      }
    }
    check.ok = check.worst <= tol_mom;
    out.push_back(check);
  }
  return out;
}

std::vector<HypothesisCheck> check_h2(const ScenarioTree& tree, const ContractBook& book, double tol_pd) {
  const auto mt = moment_tables(tree, book);
  std::vector<HypothesisCheck> out;
  for (int k = 0; k <= tree.t_bar(); ++k) {
    HypothesisCheck check;
    const double trace = mt.m_b[k].trace();
    const double lo = min_eigenvalue(mt.m_b[k]);
    check.worst = lo;
    check.location = "k=" + std::to_string(k);
    check.ok = trace > 0.0 && lo >= tol_pd * trace;
    out.push_back(check);
  }
  return out;
}

HypothesisCheck check_h3(const ScenarioTree& tree, const ContractBook& book, double tol_mom) {
  HypothesisCheck check;
  const int n = tree.n_contracts();
  for (int k = 0; k <= tree.t_bar(); ++k) {
    for (int l = k + 1; l <= tree.t_bar(); ++l) {
      const auto& uk = final_utility(book, k);
      const auto& ul = final_utility(book, l);
      Eigen::MatrixXd prod(uk.rows(), n * n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) prod.col(i * n + j) = uk.values().col(i).cwiseProduct(ul.values().col(j));
      }
      const AdaptedVariable prod_var(uk.depth(), std::move(prod));
      for (int level = 0; level <= tree.t_bar(); ++level) {
        const auto ck = conditional_expectation(tree, uk, level).values();
        const auto cl = conditional_expectation(tree, ul, level).values();
        const auto cp = conditional_expectation(tree, prod_var, level).values();
        const auto nodes = tree.layer(level);
        for (Eigen::Index r = 0; r < cp.rows(); ++r) {
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              const double v = std::abs(cp(r, i * n + j) - ck(r, i) * cl(r, j));
              if (v > check.worst) {
                check.worst = v;
                check.location = "k=" + std::to_string(k) + " l=" + std::to_string(l) +
                                 " level=" + std::to_string(level) + " node=" + std::to_string(tree.id(nodes[r]));
              }
            }
          }
        }
      }
    }
  }
  check.ok = check.worst <= tol_mom;
  return check;
}

namespace {

HypothesisCheck summarize(const std::vector<HypothesisCheck>& per_k, bool larger_is_worse) {
  HypothesisCheck s;
  bool first = true;
  for (const auto& c : per_k) {
    s.ok = s.ok && c.ok;
    const bool worse = larger_is_worse ? c.worst > s.worst : (first || c.worst < s.worst);
    if (worse) {
      s.worst = c.worst;
      s.location = c.location;
    }
    first = false;
  }
  return s;
}

}  // namespace

HypothesisReport check_hypotheses(const ScenarioTree& tree, const ContractBook& book, double tol_mom,
                                  double tol_pd) {
  HypothesisReport r;
  r.h1_per_k = check_h1(tree, book, tol_mom);
  r.h2_per_k = check_h2(tree, book, tol_pd);
  r.h1 = summarize(r.h1_per_k, true);
  r.h2 = summarize(r.h2_per_k, false);
  r.h3 = check_h3(tree, book, tol_mom);
  return r;
}

}  // namespace reinsqp

#pragma once

#include "reinsqp/scenario_tree.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace reinsqp {

inline constexpr double kTolMom = 1e-8;
inline constexpr double kTolPd = 1e-9;

/// One scenario-file utility record: u_contract(issue_time, depth(node)) = value.
/// Contract indices are 0-based.
struct UtilityEntry {
  int issue_time = 0;
  int contract = 0;
  NodeId node = 0;
  double value = 0.0;
};

/// Unit-contract utility processes u(k, t'), k = 0..T_bar, t' = 0..T_bar+T.
/// u(k, t') vanishes for t' <= k; the final utility is u(k, T_bar+T).
class ContractBook {
 public:
  /// All-zero book shaped for `tree`.
  explicit ContractBook(const ScenarioTree& tree);
  /// Throws InputError on out-of-range indices, unknown nodes, duplicate
  /// entries or a nonzero value at t' <= k.
  ContractBook(const ScenarioTree& tree, std::span<const UtilityEntry> entries);

  int t_bar() const { return t_bar_; }
  int horizon() const { return horizon_; }
  int n_contracts() const { return n_; }

  const AdaptedVariable& utility(int issue_time, int t) const;
  /// Replace u(issue_time, t); only t > issue_time may be set.
  void set_utility(int issue_time, int t, AdaptedVariable value);

  /// Flattened record list, zero values omitted.
  std::vector<UtilityEntry> entries(const ScenarioTree& tree) const;

 private:
  int t_bar_;
  int horizon_;
  int n_;
  std::vector<std::vector<AdaptedVariable>> u_;  // u_[k][t]
};

/// u^inf(k) = u(k, T_bar+T) on the deepest layer.
const AdaptedVariable& final_utility(const ContractBook& book, int k);

/// Second-order moment data consumed by the operators and the elimination.
struct MomentTables {
  std::vector<Eigen::MatrixXd> m_a;                  // E(u^inf(k) u^inf(k)^T)
  std::vector<Eigen::MatrixXd> m_b;                  // Cov(u^inf(k))
  std::vector<Eigen::VectorXd> mean_u;               // E(u^inf(k))
  std::vector<std::vector<Eigen::MatrixXd>> n_a;     // n_a[n][k] = E(E(u|F_n) E(u|F_n)^T)
  std::vector<std::vector<Eigen::MatrixXd>> n_b;     // n_b[n][k] = n_a[n][k] - mean mean^T

  int t_bar() const { return static_cast<int>(m_a.size()) - 1; }
  int n_contracts() const { return m_a.empty() ? 0 : static_cast<int>(m_a.front().rows()); }
};

MomentTables moment_tables(const ScenarioTree& tree, const ContractBook& book);

struct HypothesisCheck {
  bool ok = true;
  double worst = 0.0;  // largest violation magnitude (H1/H3) or smallest margin (H2)
  std::string location;
};

struct HypothesisReport {
  HypothesisCheck h1;
  HypothesisCheck h2;
  HypothesisCheck h3;
  std::vector<HypothesisCheck> h1_per_k;
  std::vector<HypothesisCheck> h2_per_k;

  bool all_ok() const { return h1.ok && h2.ok && h3.ok; }
};

/// u^inf(k) independent of F_k, checked through first and second moments.
std::vector<HypothesisCheck> check_h1(const ScenarioTree& tree, const ContractBook& book, double tol_mom = kTolMom);
/// min eig Cov(u^inf(k)) >= tol_pd * trace, for every k.
std::vector<HypothesisCheck> check_h2(const ScenarioTree& tree, const ContractBook& book, double tol_pd = kTolPd);
/// Conditional product factorization of u^inf(k), u^inf(l), k != l, at every level n <= T_bar.
HypothesisCheck check_h3(const ScenarioTree& tree, const ContractBook& book, double tol_mom = kTolMom);

HypothesisReport check_hypotheses(const ScenarioTree& tree, const ContractBook& book, double tol_mom = kTolMom,
                                  double tol_pd = kTolPd);

}  // namespace reinsqp

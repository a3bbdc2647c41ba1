#pragma once

#include "reinsqp/contracts.hpp"
#include "reinsqp/portfolio.hpp"
#include "reinsqp/scenario_tree.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace reinsqp {

enum class OperatorKind { A, B };

std::string_view to_string(OperatorKind kind);

inline constexpr int kDenseMaxDim = 5000;

/// (C eta)(k) = E(U(inf, eta) u^inf(k) | F_k); for B, U(inf) is centered first.
PortfolioProcess apply(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                       const PortfolioProcess& eta);

/// C(k, l) x for x adapted at depth l; the result lives on depth k.
AdaptedVariable block_apply(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, int k, int l,
                            const AdaptedVariable& x);

struct Representers {
  PortfolioProcess m;                 // (m, eta)_H = E(U(inf, eta))
  std::vector<PortfolioProcess> l;    // (l_t, eta)_H = E(dU(t+1)) - c(t) E(U(t)), t = 0..T_bar+T-1

  /// l_0..l_{T_bar+T-1} followed by m, matching constraint_levels().
  std::vector<PortfolioProcess> constraint_rows() const;
};

Representers representers(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config);

/// Largest relative mismatch of the defining identities of m and l_t over
/// `samples` random portfolios.
double representer_self_check(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                              const Representers& reps, int samples = 20, std::uint64_t seed = 1);

/// Gram matrix G of the form (a for A, b for B) in canonical coordinates:
/// form(eta, eta') = coords(eta)^T G coords(eta'). Built column by column from
/// apply(). Throws DimensionTooLarge when D > max_dim.
Eigen::MatrixXd dense_matrix(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                             int max_dim = kDenseMaxDim);

}  // namespace reinsqp

#include "reinsqp/operators.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace reinsqp {

std::string_view to_string(OperatorKind kind) { return kind == OperatorKind::A ? "A" : "B"; }

namespace {

AdaptedVariable centered(const ScenarioTree& tree, AdaptedVariable s) {
  const double mean = expectation_scalar(tree, s);
  s.values().array() -= mean;
  return s;
}

}  // namespace

PortfolioProcess apply(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book,
                       const PortfolioProcess& eta) {
  AdaptedVariable u = final_utility_rv(tree, book, eta);
  if (kind == OperatorKind::B) u = centered(tree, std::move(u));
  std::vector<AdaptedVariable> stages;
  for (int k = 0; k <= tree.t_bar(); ++k) {
    stages.push_back(conditional_expectation(tree, scale_rows(u, final_utility(book, k)), k));
  }
  return PortfolioProcess(std::move(stages));
}

AdaptedVariable block_apply(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, int k, int l,
                            const AdaptedVariable& x) {
  if (k < 0 || k > tree.t_bar() || l < 0 || l > tree.t_bar()) {
    throw InputError("block index (" + std::to_string(k) + ", " + std::to_string(l) + ") out of range");
  }
  check_adapted(tree, x, tree.n_contracts());
  if (x.depth() != l) throw InputError("block_apply: argument must live on depth " + std::to_string(l));
  AdaptedVariable s = row_dot(lift(tree, x, tree.horizon()), final_utility(book, l));
  if (kind == OperatorKind::B) s = centered(tree, std::move(s));
  return conditional_expectation(tree, scale_rows(s, final_utility(book, k)), k);
}

std::vector<PortfolioProcess> Representers::constraint_rows() const {
  std::vector<PortfolioProcess> rows = l;
  rows.push_back(m);
  return rows;
}

Representers representers(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config) {
  validate_config(tree, config);
  Representers reps;
  std::vector<AdaptedVariable> m_stages;
  for (int k = 0; k <= tree.t_bar(); ++k) {
    m_stages.push_back(conditional_expectation(tree, final_utility(book, k), k));
  }
  reps.m = PortfolioProcess(std::move(m_stages));
  for (int t = 0; t < tree.horizon(); ++t) {
    const double ct = config.c[static_cast<std::size_t>(t)];
    PortfolioProcess lt = PortfolioProcess::zeros(tree);
    for (int k = 0; k <= std::min(t, tree.t_bar()); ++k) {
      const AdaptedVariable diff =
          book.utility(k, t + 1) - (1.0 + ct) * lift(tree, book.utility(k, t), t + 1);
      lt.stage(k) = conditional_expectation(tree, diff, k);
    }
    reps.l.push_back(std::move(lt));
  }
  return reps;
}

namespace {

PortfolioProcess random_portfolio(const ScenarioTree& tree, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd coords(coordinate_count(tree));
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords[i] = normal(rng);
  return PortfolioProcess::from_coordinates(tree, coords);
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

double representer_self_check(const ScenarioTree& tree, const ContractBook& book, const ConstraintConfig& config,
                              const Representers& reps, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const PortfolioProcess eta = random_portfolio(tree, rng);
    worst = std::max(worst, rel_diff(inner_product(tree, reps.m, eta), mean_functional(tree, book, eta)));
    for (int t = 0; t < tree.horizon(); ++t) {
      const double direct = expectation_scalar(tree, delta_utility(tree, book, eta, t)) -
                            config.c[static_cast<std::size_t>(t)] * expectation_scalar(tree, utility(tree, book, eta, t));
      worst = std::max(worst, rel_diff(inner_product(tree, reps.l[static_cast<std::size_t>(t)], eta), direct));
    }
  }
  return worst;
}

Eigen::MatrixXd dense_matrix(OperatorKind kind, const ScenarioTree& tree, const ContractBook& book, int max_dim) {
  const int d = coordinate_count(tree);
  if (d > max_dim) {
    throw DimensionTooLarge("dense dimension " + std::to_string(d) + " exceeds cap " + std::to_string(max_dim));
  }
  const Eigen::VectorXd w = coordinate_weights(tree);
  Eigen::MatrixXd g(d, d);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < d; ++j) {
    e[j] = 1.0;
    g.col(j) = w.cwiseProduct(apply(kind, tree, book, PortfolioProcess::from_coordinates(tree, e)).coordinates());
    e[j] = 0.0;
  }
  return g;
}

}  // namespace reinsqp

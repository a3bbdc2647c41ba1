#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace reinsqp {

using NodeId = std::int64_t;

inline constexpr double kTolProb = 1e-9;

struct NodeSpec {
  NodeId id = 0;
  std::optional<NodeId> parent;
  int depth = 0;
  double prob = 1.0;
};

/// Raw tree description as read from a scenario file.
struct TreeSpec {
  int n_contracts = 1;
  int t_bar = 0;
  int t_tail = 0;  // T: periods after the last issue time
  std::vector<NodeSpec> nodes;

  int horizon() const { return t_bar + t_tail; }
};

struct Violation {
  std::string message;
  std::vector<NodeId> nodes;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

ValidationReport validate_tree(const TreeSpec& spec, double tol_prob = kTolProb);

/// Finite filtration encoded as a rooted tree. Nodes at depth t are the atoms
/// of F_t. Internally nodes are indexed 0..n-1 in canonical (depth, id) order.
class ScenarioTree {
 public:
  /// Throws InputError carrying the validation messages if `spec` is invalid.
  /// Child probabilities within tol_prob of summing to one are renormalized.
  explicit ScenarioTree(const TreeSpec& spec, double tol_prob = kTolProb);

  int n_contracts() const { return n_contracts_; }
  int t_bar() const { return t_bar_; }
  int t_tail() const { return t_tail_; }
  int horizon() const { return t_bar_ + t_tail_; }

  int node_count() const { return static_cast<int>(ids_.size()); }
  std::span<const int> layer(int depth) const;
  int layer_size(int depth) const { return static_cast<int>(layer(depth).size()); }

  NodeId id(int node) const { return ids_[node]; }
  int index_of(NodeId id) const;  // throws InputError on unknown id
  bool contains(NodeId id) const { return index_.count(id) != 0; }
  int depth(int node) const { return depths_[node]; }
  int parent(int node) const { return parents_[node]; }
  /// Position of the node within its depth layer.
  int position(int node) const { return positions_[node]; }
  int ancestor(int node, int depth) const;
  std::span<const int> children(int node) const;
  double cond_prob(int node) const { return cond_probs_[node]; }
  double path_probability(int node) const { return path_probs_[node]; }

  /// Path probabilities of the layer in canonical order.
  Eigen::VectorXd layer_probabilities(int depth) const;
  /// Position, in layer `depth_to`, of the ancestor of each node of layer
  /// `depth_from` (depth_to <= depth_from).
  std::vector<int> ancestor_positions(int depth_from, int depth_to) const;

 private:
  int n_contracts_;
  int t_bar_;
  int t_tail_;
  std::vector<NodeId> ids_;
  std::vector<int> parents_;
  std::vector<int> depths_;
  std::vector<int> positions_;
  std::vector<double> cond_probs_;
  std::vector<double> path_probs_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> layers_;
  std::vector<std::vector<int>> ancestors_;  // ancestors_[node][d], d <= depth
  std::unordered_map<NodeId, int> index_;
};

double path_probability(const ScenarioTree& tree, NodeId node);

/// A (scalar- or vector-valued) random variable measurable w.r.t. F_depth:
/// one row per node of the layer, one column per component.
class AdaptedVariable {
 public:
  AdaptedVariable() = default;
  AdaptedVariable(int depth, Eigen::MatrixXd values) : depth_(depth), values_(std::move(values)) {}

  static AdaptedVariable zeros(const ScenarioTree& tree, int depth, int dim);
  static AdaptedVariable constant(const ScenarioTree& tree, int depth, const Eigen::VectorXd& value);

  int depth() const { return depth_; }
  int dim() const { return static_cast<int>(values_.cols()); }
  int rows() const { return static_cast<int>(values_.rows()); }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { return values_; }

  /// Value at a node given by id.
  Eigen::VectorXd at(const ScenarioTree& tree, NodeId node) const;

  AdaptedVariable& operator+=(const AdaptedVariable& other);
  AdaptedVariable& operator-=(const AdaptedVariable& other);
  AdaptedVariable& operator*=(double s);

 private:
  int depth_ = 0;
  Eigen::MatrixXd values_;
};

AdaptedVariable operator+(AdaptedVariable a, const AdaptedVariable& b);
AdaptedVariable operator-(AdaptedVariable a, const AdaptedVariable& b);
AdaptedVariable operator*(double s, AdaptedVariable a);

/// Throws InputError unless `x` has one row per node of its depth layer.
void check_adapted(const ScenarioTree& tree, const AdaptedVariable& x, int expected_dim = -1);

Eigen::VectorXd expectation(const ScenarioTree& tree, const AdaptedVariable& x);
double expectation_scalar(const ScenarioTree& tree, const AdaptedVariable& x);

/// E(X | F_k) for X measurable at depth t >= k.
AdaptedVariable conditional_expectation(const ScenarioTree& tree, const AdaptedVariable& x, int k);

/// The same random variable, expressed on the finer layer `depth >= x.depth()`.
AdaptedVariable lift(const ScenarioTree& tree, const AdaptedVariable& x, int depth);

/// Nodewise product of a scalar variable with a vector variable on the same layer.
AdaptedVariable scale_rows(const AdaptedVariable& scalar, const AdaptedVariable& x);

/// Nodewise dot product of two vector variables on the same layer.
AdaptedVariable row_dot(const AdaptedVariable& a, const AdaptedVariable& b);

/// An element of H: the underwriting levels eta(k) in R^N on every depth-k
/// node, k = 0..T_bar.
class PortfolioProcess {
 public:
  PortfolioProcess() = default;
  explicit PortfolioProcess(std::vector<AdaptedVariable> stages) : stages_(std::move(stages)) {}

  static PortfolioProcess zeros(const ScenarioTree& tree);
  /// Constant in each stage: eta(k) = per_stage.segment(k*N, N).
  static PortfolioProcess deterministic(const ScenarioTree& tree, const Eigen::VectorXd& per_stage);
  static PortfolioProcess from_coordinates(const ScenarioTree& tree, const Eigen::VectorXd& coords);

  /// Canonical coordinates: stage-major, then node (canonical order), then contract.
  Eigen::VectorXd coordinates() const;

  int stage_count() const { return static_cast<int>(stages_.size()); }
  const AdaptedVariable& stage(int k) const { return stages_[k]; }
  AdaptedVariable& stage(int k) { return stages_[k]; }
  const std::vector<AdaptedVariable>& stages() const { return stages_; }

  double min_value() const;

  PortfolioProcess& operator+=(const PortfolioProcess& other);
  PortfolioProcess& operator-=(const PortfolioProcess& other);
  PortfolioProcess& operator*=(double s);

 private:
  std::vector<AdaptedVariable> stages_;
};

PortfolioProcess operator+(PortfolioProcess a, const PortfolioProcess& b);
PortfolioProcess operator-(PortfolioProcess a, const PortfolioProcess& b);
PortfolioProcess operator*(double s, PortfolioProcess a);

void check_portfolio(const ScenarioTree& tree, const PortfolioProcess& eta);

/// (eta, eta')_H = sum_k E(eta(k) . eta'(k)).
double inner_product(const ScenarioTree& tree, const PortfolioProcess& a, const PortfolioProcess& b);
double h_norm(const ScenarioTree& tree, const PortfolioProcess& a);

/// D = N * sum_{k <= T_bar} |layer k|.
int coordinate_count(const ScenarioTree& tree);
/// Path probability of the node owning each canonical coordinate.
Eigen::VectorXd coordinate_weights(const ScenarioTree& tree);

}  // namespace reinsqp

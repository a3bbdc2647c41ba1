#include "reinsqp/scenario_tree.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace reinsqp {

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

ValidationReport validate_tree(const TreeSpec& spec, double tol_prob) {
  ValidationReport report;
  auto flag = [&](std::string msg, std::vector<NodeId> nodes = {}) {
    report.violations.push_back({std::move(msg), std::move(nodes)});
  };

  if (spec.n_contracts < 1) flag("N must be >= 1");
  if (spec.t_bar < 0) flag("T_bar must be >= 0");
  if (spec.t_tail < 0) flag("T must be >= 0");
  if (spec.nodes.empty()) {
    flag("tree has no nodes");
    return report;
  }

  std::map<NodeId, const NodeSpec*> by_id;
  for (const auto& n : spec.nodes) {
    if (!by_id.emplace(n.id, &n).second) flag("duplicate node id", {n.id});
  }

  int roots = 0;
  std::map<NodeId, std::vector<const NodeSpec*>> kids;
  for (const auto& n : spec.nodes) {
    if (!(n.prob > 0.0)) flag("non-positive probability " + format_double(n.prob), {n.id});
    if (n.prob > 1.0 + tol_prob) flag("probability exceeds 1: " + format_double(n.prob), {n.id});
    if (n.depth < 0 || n.depth > spec.horizon()) {
      flag("depth " + std::to_string(n.depth) + " outside [0, " + std::to_string(spec.horizon()) + "]", {n.id});
    }
    if (!n.parent) {
      ++roots;
      if (n.depth != 0) flag("root node must have depth 0", {n.id});
      if (std::abs(n.prob - 1.0) > tol_prob) flag("root probability must be 1", {n.id});
      continue;
    }
    auto it = by_id.find(*n.parent);
    if (it == by_id.end()) {
      flag("unknown parent " + std::to_string(*n.parent), {n.id});
      continue;
    }
    if (n.depth != it->second->depth + 1) {
      flag("depth " + std::to_string(n.depth) + " != parent depth + 1", {n.id, *n.parent});
    }
    kids[*n.parent].push_back(&n);
  }
  if (roots != 1) flag("expected exactly one root, found " + std::to_string(roots));

  for (const auto& n : spec.nodes) {
    auto it = kids.find(n.id);
    if (it == kids.end()) {
      if (n.depth < spec.horizon()) flag("node below horizon has no children", {n.id});
      continue;
    }
    double sum = 0.0;
    for (const auto* c : it->second) sum += c->prob;
    if (std::abs(sum - 1.0) > tol_prob) {
      flag("children sum " + format_double(sum) + " != 1", {n.id});
    }
  }
  return report;
}

ScenarioTree::ScenarioTree(const TreeSpec& spec, double tol_prob)
    : n_contracts_(spec.n_contracts), t_bar_(spec.t_bar), t_tail_(spec.t_tail) {
  if (auto report = validate_tree(spec, tol_prob); !report.ok()) {
    std::string msg = "invalid scenario tree:";
    for (const auto& v : report.violations) msg += " [" + v.message + "]";
    throw InputError(msg);
  }

  std::vector<const NodeSpec*> sorted;
  sorted.reserve(spec.nodes.size());
  for (const auto& n : spec.nodes) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(), [](const NodeSpec* a, const NodeSpec* b) {
    return a->depth != b->depth ? a->depth < b->depth : a->id < b->id;
  });

  const int n = static_cast<int>(sorted.size());
  ids_.resize(n);
  parents_.assign(n, -1);
  depths_.resize(n);
  positions_.resize(n);
  cond_probs_.resize(n);
  path_probs_.resize(n);
  children_.resize(n);
  layers_.assign(horizon() + 1, {});
  ancestors_.resize(n);

  for (int i = 0; i < n; ++i) {
    ids_[i] = sorted[i]->id;
    index_[ids_[i]] = i;
    depths_[i] = sorted[i]->depth;
    cond_probs_[i] = sorted[i]->prob;
    positions_[i] = static_cast<int>(layers_[depths_[i]].size());
    layers_[depths_[i]].push_back(i);
  }
  for (int i = 0; i < n; ++i) {
    if (sorted[i]->parent) {
      parents_[i] = index_.at(*sorted[i]->parent);
      children_[parents_[i]].push_back(i);
    }
  }

  // Exact renormalization of sibling probabilities (already within tol).
  cond_probs_[layers_[0].front()] = 1.0;
  for (int i = 0; i < n; ++i) {
    if (children_[i].empty()) continue;
    double sum = 0.0;
    for (int c : children_[i]) sum += cond_probs_[c];
    for (int c : children_[i]) cond_probs_[c] /= sum;
  }

  for (int i = 0; i < n; ++i) {
    if (parents_[i] < 0) {
      path_probs_[i] = 1.0;
      ancestors_[i] = {i};
    } else {
      path_probs_[i] = path_probs_[parents_[i]] * cond_probs_[i];
      ancestors_[i] = ancestors_[parents_[i]];
      ancestors_[i].push_back(i);
    }
  }
}

std::span<const int> ScenarioTree::layer(int depth) const {
  if (depth < 0 || depth > horizon()) {
    throw InputError("depth " + std::to_string(depth) + " outside tree horizon");
  }
  return layers_[depth];
}

int ScenarioTree::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InputError("unknown node id " + std::to_string(id));
  return it->second;
}

int ScenarioTree::ancestor(int node, int depth) const {
  if (depth < 0 || depth > depths_[node]) {
    throw InputError("ancestor depth " + std::to_string(depth) + " not above node");
  }
  return ancestors_[node][depth];
}

std::span<const int> ScenarioTree::children(int node) const { return children_[node]; }

Eigen::VectorXd ScenarioTree::layer_probabilities(int depth) const {
  const auto nodes = layer(depth);
  Eigen::VectorXd p(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) p[static_cast<Eigen::Index>(i)] = path_probs_[nodes[i]];
  return p;
}

std::vector<int> ScenarioTree::ancestor_positions(int depth_from, int depth_to) const {
  const auto nodes = layer(depth_from);
  std::vector<int> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = positions_[ancestor(nodes[i], depth_to)];
  return out;
}

double path_probability(const ScenarioTree& tree, NodeId node) {
  return tree.path_probability(tree.index_of(node));
}

// --- AdaptedVariable ------------------------------------------------------

AdaptedVariable AdaptedVariable::zeros(const ScenarioTree& tree, int depth, int dim) {
  return {depth, Eigen::MatrixXd::Zero(tree.layer_size(depth), dim)};
}

AdaptedVariable AdaptedVariable::constant(const ScenarioTree& tree, int depth, const Eigen::VectorXd& value) {
  return {depth, value.transpose().replicate(tree.layer_size(depth), 1)};
}

Eigen::VectorXd AdaptedVariable::at(const ScenarioTree& tree, NodeId node) const {
  const int idx = tree.index_of(node);
  if (tree.depth(idx) != depth_) {
    throw InputError("node " + std::to_string(node) + " is not at depth " + std::to_string(depth_));
  }
  return values_.row(tree.position(idx)).transpose();
}

AdaptedVariable& AdaptedVariable::operator+=(const AdaptedVariable& other) {
  if (other.depth_ != depth_ || other.values_.rows() != values_.rows() || other.values_.cols() != values_.cols()) {
    throw InputError("adapted variables differ in shape");
  }
  values_ += other.values_;
  return *this;
}

AdaptedVariable& AdaptedVariable::operator-=(const AdaptedVariable& other) {
  if (other.depth_ != depth_ || other.values_.rows() != values_.rows() || other.values_.cols() != values_.cols()) {
    throw InputError("adapted variables differ in shape");
  }
  values_ -= other.values_;
  return *this;
}

AdaptedVariable& AdaptedVariable::operator*=(double s) {
  values_ *= s;
  return *this;
}

AdaptedVariable operator+(AdaptedVariable a, const AdaptedVariable& b) { return a += b; }
AdaptedVariable operator-(AdaptedVariable a, const AdaptedVariable& b) { return a -= b; }
AdaptedVariable operator*(double s, AdaptedVariable a) { return a *= s; }

void check_adapted(const ScenarioTree& tree, const AdaptedVariable& x, int expected_dim) {
  if (x.depth() < 0 || x.depth() > tree.horizon()) {
    throw InputError("adapted variable depth " + std::to_string(x.depth()) + " outside tree");
  }
  if (x.rows() != tree.layer_size(x.depth())) {
    throw InputError("adapted variable defined on wrong node set at depth " + std::to_string(x.depth()));
  }
  if (expected_dim >= 0 && x.dim() != expected_dim) {
    throw InputError("adapted variable has dimension " + std::to_string(x.dim()) + ", expected " +
                     std::to_string(expected_dim));
  }
}

Eigen::VectorXd expectation(const ScenarioTree& tree, const AdaptedVariable& x) {
  check_adapted(tree, x);
  return x.values().transpose() * tree.layer_probabilities(x.depth());
}

double expectation_scalar(const ScenarioTree& tree, const AdaptedVariable& x) {
  check_adapted(tree, x, 1);
  return expectation(tree, x)[0];
}

AdaptedVariable conditional_expectation(const ScenarioTree& tree, const AdaptedVariable& x, int k) {
  check_adapted(tree, x);
  if (k < 0 || k > x.depth()) {
    throw InputError("conditional expectation level " + std::to_string(k) + " exceeds variable depth " +
                     std::to_string(x.depth()));
  }
  if (k == x.depth()) return x;
  const auto fine = tree.layer(x.depth());
  const auto anc = tree.ancestor_positions(x.depth(), k);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(tree.layer_size(k), x.dim());
  for (std::size_t i = 0; i < fine.size(); ++i) {
    out.row(anc[i]) += tree.path_probability(fine[i]) * x.values().row(static_cast<Eigen::Index>(i));
  }
  const auto coarse = tree.layer(k);
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) /= tree.path_probability(coarse[j]);
  }
  return {k, std::move(out)};
}

AdaptedVariable lift(const ScenarioTree& tree, const AdaptedVariable& x, int depth) {
  check_adapted(tree, x);
  if (depth < x.depth() || depth > tree.horizon()) {
    throw InputError("cannot lift depth-" + std::to_string(x.depth()) + " variable to depth " + std::to_string(depth));
  }
  if (depth == x.depth()) return x;
  const auto anc = tree.ancestor_positions(depth, x.depth());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(anc.size()), x.dim());
  for (std::size_t i = 0; i < anc.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.values().row(anc[i]);
  return {depth, std::move(out)};
}

AdaptedVariable scale_rows(const AdaptedVariable& scalar, const AdaptedVariable& x) {
  if (scalar.dim() != 1 || scalar.depth() != x.depth() || scalar.rows() != x.rows()) {
    throw InputError("scale_rows: shape mismatch");
  }
  return {x.depth(), x.values().array().colwise() * scalar.values().col(0).array()};
}

AdaptedVariable row_dot(const AdaptedVariable& a, const AdaptedVariable& b) {
  if (a.depth() != b.depth() || a.rows() != b.rows() || a.dim() != b.dim()) {
    throw InputError("row_dot: shape mismatch");
  }
  return {a.depth(), a.values().cwiseProduct(b.values()).rowwise().sum()};
}

// --- PortfolioProcess -----------------------------------------------------

PortfolioProcess PortfolioProcess::zeros(const ScenarioTree& tree) {
  std::vector<AdaptedVariable> stages;
  for (int k = 0; k <= tree.t_bar(); ++k) stages.push_back(AdaptedVariable::zeros(tree, k, tree.n_contracts()));
  return PortfolioProcess(std::move(stages));
}

PortfolioProcess PortfolioProcess::deterministic(const ScenarioTree& tree, const Eigen::VectorXd& per_stage) {
  const int n = tree.n_contracts();
  if (per_stage.size() != static_cast<Eigen::Index>(n) * (tree.t_bar() + 1)) {
    throw InputError("deterministic portfolio needs (T_bar+1)*N values");
  }
  std::vector<AdaptedVariable> stages;
  for (int k = 0; k <= tree.t_bar(); ++k) {
    stages.push_back(AdaptedVariable::constant(tree, k, per_stage.segment(static_cast<Eigen::Index>(k) * n, n)));
  }
  return PortfolioProcess(std::move(stages));
}

PortfolioProcess PortfolioProcess::from_coordinates(const ScenarioTree& tree, const Eigen::VectorXd& coords) {
  if (coords.size() != coordinate_count(tree)) {
    throw InputError("coordinate vector has length " + std::to_string(coords.size()) + ", expected " +
                     std::to_string(coordinate_count(tree)));
  }
  const int n = tree.n_contracts();
  std::vector<AdaptedVariable> stages;
  Eigen::Index offset = 0;
  for (int k = 0; k <= tree.t_bar(); ++k) {
    const int rows = tree.layer_size(k);
    Eigen::MatrixXd v(rows, n);
    for (int r = 0; r < rows; ++r) {
      v.row(r) = coords.segment(offset, n).transpose();
      offset += n;
    }
    stages.emplace_back(k, std::move(v));
  }
  return PortfolioProcess(std::move(stages));
}

Eigen::VectorXd PortfolioProcess::coordinates() const {
  Eigen::Index total = 0;
  for (const auto& s : stages_) total += s.values().size();
  Eigen::VectorXd out(total);
  Eigen::Index offset = 0;
  for (const auto& s : stages_) {
    for (int r = 0; r < s.rows(); ++r) {
      out.segment(offset, s.dim()) = s.values().row(r).transpose();
      offset += s.dim();
    }
  }
  return out;
}

double PortfolioProcess::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& s : stages_) {
    if (s.values().size() > 0) m = std::min(m, s.values().minCoeff());
  }
  return m;
}

PortfolioProcess& PortfolioProcess::operator+=(const PortfolioProcess& other) {
  if (other.stages_.size() != stages_.size()) throw InputError("portfolio stage count mismatch");
  for (std::size_t k = 0; k < stages_.size(); ++k) stages_[k] += other.stages_[k];
  return *this;
}

PortfolioProcess& PortfolioProcess::operator-=(const PortfolioProcess& other) {
  if (other.stages_.size() != stages_.size()) throw InputError("portfolio stage count mismatch");
  for (std::size_t k = 0; k < stages_.size(); ++k) stages_[k] -= other.stages_[k];
  return *this;
}

PortfolioProcess& PortfolioProcess::operator*=(double s) {
  for (auto& st : stages_) st *= s;
  return *this;
}

PortfolioProcess operator+(PortfolioProcess a, const PortfolioProcess& b) { return a += b; }
PortfolioProcess operator-(PortfolioProcess a, const PortfolioProcess& b) { return a -= b; }
PortfolioProcess operator*(double s, PortfolioProcess a) { return a *= s; }

void check_portfolio(const ScenarioTree& tree, const PortfolioProcess& eta) {
  if (eta.stage_count() != tree.t_bar() + 1) {
    throw InputError("portfolio has " + std::to_string(eta.stage_count()) + " stages, expected " +
                     std::to_string(tree.t_bar() + 1));
  }
  for (int k = 0; k <= tree.t_bar(); ++k) {
    if (eta.stage(k).depth() != k) throw InputError("portfolio stage " + std::to_string(k) + " has wrong depth");
    check_adapted(tree, eta.stage(k), tree.n_contracts());
  }
}

double inner_product(const ScenarioTree& tree, const PortfolioProcess& a, const PortfolioProcess& b) {
  check_portfolio(tree, a);
  check_portfolio(tree, b);
  double sum = 0.0;
  for (int k = 0; k <= tree.t_bar(); ++k) {
    const Eigen::VectorXd dots = a.stage(k).values().cwiseProduct(b.stage(k).values()).rowwise().sum();
    sum += dots.dot(tree.layer_probabilities(k));
  }
  return sum;
}

double h_norm(const ScenarioTree& tree, const PortfolioProcess& a) {
  return std::sqrt(std::max(0.0, inner_product(tree, a, a)));
}

int coordinate_count(const ScenarioTree& tree) {
  int nodes = 0;
  for (int k = 0; k <= tree.t_bar(); ++k) nodes += tree.layer_size(k);
  return nodes * tree.n_contracts();
}

Eigen::VectorXd coordinate_weights(const ScenarioTree& tree) {
  Eigen::VectorXd w(coordinate_count(tree));
  Eigen::Index offset = 0;
  for (int k = 0; k <= tree.t_bar(); ++k) {
    for (int node : tree.layer(k)) {
      w.segment(offset, tree.n_contracts()).setConstant(tree.path_probability(node));
      offset += tree.n_contracts();
    }
  }
  return w;
}

}  // namespace reinsqp

#include "fixtures.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <numeric>

namespace reinsqp::testing {

Scenario coin2_scenario(double e) {
  Scenario s;
  s.tree.n_contracts = 1;
  s.tree.t_bar = 1;
  s.tree.t_tail = 1;
  s.tree.nodes = {{kRoot, std::nullopt, 0, 1.0}, {kA, kRoot, 1, 0.5},  {kB, kRoot, 1, 0.5},
                  {kAUp, kA, 2, 0.5},           {kADown, kA, 2, 0.5}, {kBUp, kB, 2, 0.5},
                  {kBDown, kB, 2, 0.5}};
  s.utilities = {{0, 0, kAUp, 3.0}, {0, 0, kADown, 3.0}, {0, 0, kBUp, 1.0}, {0, 0, kBDown, 1.0},
                 {1, 0, kAUp, 2.0}, {1, 0, kADown, 0.0}, {1, 0, kBUp, 2.0}, {1, 0, kBDown, 0.0}};
  s.constraints.c = {0.0, 0.0};
  s.constraints.e = e;
  s.constraints.k0 = 0.0;
  return s;
}

Model coin2_model(double e) { return build_model(coin2_scenario(e)); }

namespace {

struct Draft {
  int n = 1;
  int t_bar = 0;
  int t_tail = 1;
  std::vector<int> branching;             // branching[t] for moves into depth t (t >= 1)
  std::vector<std::vector<double>> prob;  // prob[t][move]
  std::vector<int> owner;                 // owner[t] = issue time owning move t
};

Draft draw_shape(std::mt19937_64& rng, const RandomOptions& o) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (;;) {
    Draft d;
    d.t_bar = pick(0, o.max_t_bar);
    d.t_tail = pick(1, std::max(1, o.max_t));
    const int horizon = d.t_bar + d.t_tail;
    d.branching.assign(horizon + 1, 1);
    d.prob.assign(horizon + 1, {1.0});
    for (int t = 1; t <= horizon; ++t) {
      d.branching[t] = pick(2, std::max(2, o.max_branching));
      std::vector<double> p(d.branching[t]);
      for (double& x : p) x = 0.2 + unit(rng);
      const double total = std::accumulate(p.begin(), p.end(), 0.0);
      for (double& x : p) x /= total;
      d.prob[t] = p;
    }
    d.owner.assign(horizon + 1, -1);
    for (int k = 0; k <= d.t_bar; ++k) d.owner[k + 1] = k;
    for (int t = d.t_bar + 2; t <= horizon; ++t) d.owner[t] = pick(0, d.t_bar);

    int min_outcomes = 1 << 30;
    for (int k = 0; k <= d.t_bar; ++k) {
      int outcomes = 1;
      for (int t = 1; t <= horizon; ++t)
        if (d.owner[t] == k) outcomes *= d.branching[t];
      min_outcomes = std::min(min_outcomes, outcomes);
    }
    d.n = pick(1, std::max(1, std::min(o.max_n, min_outcomes - 1)));

    long layer = 1;
    long dim = 0;
    for (int k = 0; k <= d.t_bar; ++k) {
      if (k > 0) layer *= d.branching[k];
      dim += layer * d.n;
    }
    if (dim <= o.max_dim) return d;
  }
}

}  // namespace

Scenario random_scenario(std::mt19937_64& rng, const RandomOptions& opts) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    const Draft d = draw_shape(rng, opts);
    const int horizon = d.t_bar + d.t_tail;

    // Enumerate nodes by move sequence.
    std::vector<std::vector<int>> moves{{}};
    std::vector<int> parent{-1};
    std::vector<int> depth{0};
    std::vector<std::vector<int>> layers{{0}};
    for (int t = 1; t <= horizon; ++t) {
      std::vector<int> next;
      for (int v : layers[t - 1]) {
        for (int m = 0; m < d.branching[t]; ++m) {
          std::vector<int> path = moves[v];
          path.push_back(m);
          moves.push_back(path);
          parent.push_back(v);
          depth.push_back(t);
          next.push_back(static_cast<int>(moves.size()) - 1);
        }
      }
      layers.push_back(next);
    }
    const int count = static_cast<int>(moves.size());
    std::vector<NodeId> ids(count);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    for (auto& id : ids) id = 3 * id + 7;

    Scenario s;
    s.tree.n_contracts = d.n;
    s.tree.t_bar = d.t_bar;
    s.tree.t_tail = d.t_tail;
    for (int v = 0; v < count; ++v) {
      NodeSpec spec;
      spec.id = ids[v];
      if (parent[v] >= 0) spec.parent = ids[parent[v]];
      spec.depth = depth[v];
      spec.prob = depth[v] == 0 ? 1.0 : d.prob[depth[v]][moves[v].back()];
      s.tree.nodes.push_back(spec);
    }
    std::shuffle(s.tree.nodes.begin(), s.tree.nodes.end(), rng);

    // Final utilities: u^inf_i(k) is a random table over the outcomes of the moves k owns.
    for (int k = 0; k <= d.t_bar; ++k) {
      std::vector<int> owned;
      int outcomes = 1;
      for (int t = 1; t <= horizon; ++t) {
        if (d.owner[t] == k) {
          owned.push_back(t);
          outcomes *= d.branching[t];
        }
      }
      for (int i = 0; i < d.n; ++i) {
        const double drift = 0.5 + 1.5 * unit(rng);
        std::vector<double> table(outcomes);
        for (double& x : table) x = drift + 3.0 * (unit(rng) - 0.5);
        for (int leaf : layers[horizon]) {
          int index = 0;
          for (int t : owned) index = index * d.branching[t] + moves[leaf][t - 1];
          s.utilities.push_back({k, i, ids[leaf], table[index]});
        }
        if (!opts.interim) continue;
        for (int t = k + 1; t < horizon; ++t) {
          const double share = static_cast<double>(t - k) / (horizon - k);
          for (int v : layers[t]) s.utilities.push_back({k, i, ids[v], share * drift + 0.2 * (unit(rng) - 0.5)});
        }
      }
    }

    s.constraints.c.assign(horizon, 0.0);
    if (opts.random_rates) {
      for (double& c : s.constraints.c) c = 0.1 * unit(rng);
      s.constraints.k0 = 2.0 * unit(rng);
    }

    Model model = build_model(s);
    bool h2 = true;
    for (const auto& c : check_h2(*model.tree, *model.book)) h2 = h2 && c.ok;
    if (!h2) continue;

    // Reference portfolio: all ones, scaled until the profitability rows hold.
    const int dim = d.n * (d.t_bar + 1);
    const PortfolioProcess ones = PortfolioProcess::deterministic(*model.tree, Eigen::VectorXd::Ones(dim));
    ConstraintConfig probe = s.constraints;
    probe.e = 0.0;
    const ConstraintReport at_ones = evaluate_constraints(*model.tree, *model.book, ones, probe);
    double scale = 1.0;
    bool ok = true;
    for (int t = 0; t < horizon; ++t) {
      const double per_unit = at_ones.roe_slack[t] + s.constraints.c[t] * s.constraints.k0;
      const double need = s.constraints.c[t] * s.constraints.k0;
      if (need <= 0.0) {
        if (per_unit < 0.0) ok = false;
        continue;
      }
      if (per_unit <= 0.0) {
        ok = false;
        break;
      }
      scale = std::max(scale, 1.5 * need / per_unit);
    }
    if (!ok || at_ones.mean_value <= 0.0) continue;
    s.constraints.e = opts.e_fraction * scale * at_ones.mean_value;
    return s;
  }
}

PortfolioProcess random_portfolio(const ScenarioTree& tree, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::VectorXd coords(coordinate_count(tree));
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords(i) = dist(rng);
  return PortfolioProcess::from_coordinates(tree, coords);
}

AdaptedVariable random_adapted(const ScenarioTree& tree, int depth, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd values(tree.layer_size(depth), dim);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = dist(rng);
  return AdaptedVariable(depth, values);
}

double rel_h_error(const ScenarioTree& tree, const PortfolioProcess& x, const PortfolioProcess& ref) {
  const double denom = h_norm(tree, ref);
  const double err = h_norm(tree, x - ref);
  return denom > 0.0 ? err / denom : err;
}

}  // namespace reinsqp::testing

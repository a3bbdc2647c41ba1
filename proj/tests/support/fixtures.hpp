#pragma once

#include "reinsqp/scenario_io.hpp"

#include <random>

namespace reinsqp::testing {

/// N=1, T_bar=1, T=1 coin-flip tree. Node ids: root 0, a=1, b=2,
/// a-up=3, a-down=4, b-up=5, b-down=6. u^inf(0) = 3 on a, 1 on b;
/// u^inf(1) = 2 on up leaves, 0 on down leaves; interim utilities zero.
Scenario coin2_scenario(double e = 3.0);
Model coin2_model(double e = 3.0);

inline constexpr NodeId kRoot = 0, kA = 1, kB = 2, kAUp = 3, kADown = 4, kBUp = 5, kBDown = 6;

struct RandomOptions {
  int max_n = 3;
  int max_t_bar = 3;
  int max_t = 2;
  int max_branching = 3;
  int max_dim = 200;
  bool interim = true;         // nonzero interim utilities
  bool random_rates = true;    // c(t) > 0 and K0 > 0
  double e_fraction = 0.5;     // e as a fraction of a reference attainable mean
};

/// Product tree whose moves are independent across depths. Every issue time k
/// owns a disjoint set of later moves and u^inf(k) depends on those only, so
/// H1 and H3 hold by construction; instances failing H2 or exceeding the
/// coordinate cap are redrawn.
Scenario random_scenario(std::mt19937_64& rng, const RandomOptions& opts = {});

/// Uniform random portfolio with entries in [lo, hi].
PortfolioProcess random_portfolio(const ScenarioTree& tree, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);

/// Adapted variable with uniform entries in [-1, 1].
AdaptedVariable random_adapted(const ScenarioTree& tree, int depth, int dim, std::mt19937_64& rng);

double rel_h_error(const ScenarioTree& tree, const PortfolioProcess& x, const PortfolioProcess& ref);

}  // namespace reinsqp::testing

#pragma once

#include <functional>
#include <optional>

namespace reinsqp::detail {

struct MeanSearch {
  double e = 0.0;
  int steps = 0;
};

/// Largest mean level e >= e_start whose least variance V(e) stays within
/// sigma2. `variance` returns nullopt where the constraint set is empty.
/// Requires V(e_start) <= sigma2. Expands geometrically, then runs Illinois
/// regula falsi (bisection where V is undefined).
MeanSearch search_mean_level(double sigma2, double e_start,
                             const std::function<std::optional<double>(double)>& variance);

}  // namespace reinsqp::detail

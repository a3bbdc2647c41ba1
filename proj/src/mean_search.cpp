#include "mean_search.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reinsqp::detail {

MeanSearch search_mean_level(double sigma2, double e_start,
                             const std::function<std::optional<double>(double)>& variance) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  MeanSearch out;
  double e_lo = e_start;
  const auto v0 = variance(e_lo);
  if (!v0 || *v0 > sigma2) throw Infeasible("variance cap below the least attainable variance");
  double f_lo = *v0 - sigma2;
  double gap = -f_lo;

  double e_hi = std::max(1.0, 2.0 * std::abs(e_lo));
  double f_hi = kInf;
  bool bracketed = false;
  for (int i = 0; i < 200; ++i, ++out.steps) {
    const auto v = variance(e_hi);
    if (!v) {
      bracketed = true;
      break;
    }
    if (*v > sigma2) {
      f_hi = *v - sigma2;
      bracketed = true;
      break;
    }
    e_lo = e_hi;
    f_lo = *v - sigma2;
    gap = -f_lo;
    e_hi *= 2.0;
  }
  if (!bracketed) throw NumericalError("expected final utility appears unbounded under the variance cap");

  int side = 0;
  for (int it = 0; it < 300; ++it, ++out.steps) {
    if (gap <= 1e-11 * sigma2) break;
    if (e_hi - e_lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(e_hi))) break;
    double e_mid = 0.5 * (e_lo + e_hi);
    if (std::isfinite(f_hi)) {
      const double cand = e_lo - f_lo * (e_hi - e_lo) / (f_hi - f_lo);
      if (cand > e_lo && cand < e_hi) e_mid = cand;
    }
    const auto v = variance(e_mid);
    if (!v) {
      e_hi = e_mid;
      f_hi = kInf;
      side = 0;
      continue;
    }
    const double f_mid = *v - sigma2;
    if (f_mid > 0.0) {
      e_hi = e_mid;
      f_hi = f_mid;
      if (side == -1) f_lo *= 0.5;
      side = -1;
    } else {
      e_lo = e_mid;
      f_lo = f_mid;
      gap = -f_mid;
      if (side == 1 && std::isfinite(f_hi)) f_hi *= 0.5;
      side = 1;
    }
  }
  out.e = e_lo;
  return out;
}

}  // namespace reinsqp::detail

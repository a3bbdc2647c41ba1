#include "reinsqp/nonneg_qp.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace reinsqp {

namespace {

std::vector<Eigen::Index> indices_of(const std::vector<bool>& mask) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(static_cast<Eigen::Index>(i));
  }
  return idx;
}

}  // namespace

Eigen::VectorXd solve_on_passive_set(const Eigen::MatrixXd& m, const Eigen::VectorXd& x,
                                     const std::vector<bool>& passive) {
  const auto idx = indices_of(passive);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  if (idx.empty()) return y;
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd sub(n, n);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs[i] = x[idx[i]];
    for (Eigen::Index j = 0; j < n; ++j) sub(i, j) = m(idx[i], idx[j]);
  }
  const Eigen::VectorXd z = sub.ldlt().solve(rhs);
  for (Eigen::Index i = 0; i < n; ++i) y[idx[i]] = z[i];
  return y;
}

NonnegQpResult nonneg_qp(const Eigen::MatrixXd& m, const Eigen::VectorXd& x, const std::vector<bool>& free_mask,
                         double tol_pd) {
  const Eigen::Index n = x.size();
  if (m.rows() != n || m.cols() != n) throw InputError("nonneg_qp: matrix/vector size mismatch");
  std::vector<bool> is_free = free_mask;
  is_free.resize(static_cast<std::size_t>(n), false);
  NonnegQpResult r;
  r.passive = is_free;
  if (n == 0) {
    r.plus = r.minus = Eigen::VectorXd();
    return r;
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw NotSpd("nonneg_qp: matrix is not symmetric");
  }
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()[0];
    const double hi = es.eigenvalues()[n - 1];
    if (!(lo >= tol_pd * std::max(hi, 1e-300)) || !(hi > 0.0)) {
      throw NotSpd("nonneg_qp: matrix is not positive definite (min eigenvalue " + std::to_string(lo) + ")");
    }
  }

  const double scale = std::max({1.0, x.cwiseAbs().maxCoeff(), m.cwiseAbs().maxCoeff()});
  const double tol = 1e-13 * scale;
  const int max_pivots = 50 * static_cast<int>((n + 1) * (n + 1));
  auto& passive = r.passive;

  Eigen::VectorXd y = solve_on_passive_set(m, x, passive);
  while (true) {
    const Eigen::VectorXd w = x - m * y;
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    if (++r.pivots > max_pivots) throw MaxPivotsExceeded("nonneg_qp: pivot limit reached");
    passive[static_cast<std::size_t>(enter)] = true;

    while (true) {
      const Eigen::VectorXd z = solve_on_passive_set(m, x, passive);
      double alpha = 1.0;
      Eigen::Index leave = -1;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (passive[sj] && !is_free[sj] && z[j] <= 0.0) {
          const double denom = y[j] - z[j];
          const double a = denom > 0.0 ? y[j] / denom : 0.0;
          if (leave < 0 || a < alpha) {
            alpha = a;
            leave = j;
          }
        }
      }
      if (leave < 0) {
        y = z;
        break;
      }
      if (++r.pivots > max_pivots) throw MaxPivotsExceeded("nonneg_qp: pivot limit reached");
      y += alpha * (z - y);
      y[leave] = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (passive[sj] && !is_free[sj] && y[j] <= 0.0) {
          passive[sj] = false;
          y[j] = 0.0;
        }
      }
    }
  }

  r.plus = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (passive[static_cast<std::size_t>(j)]) r.plus[j] = y[j];
  }
  r.minus = m * r.plus - x;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (passive[static_cast<std::size_t>(j)]) {
      r.minus[j] = 0.0;
    } else {
      r.minus[j] = std::max(0.0, r.minus[j]);
    }
  }
  return r;
}

}  // namespace reinsqp

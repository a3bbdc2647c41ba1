#include "reinsqp/dual_active_set.hpp"

#include "reinsqp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reinsqp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Factored state of the dual method: J = L^{-T} Q, with the first `iq`
/// columns of R holding the triangular factor of the active normals.
class ActiveSet {
 public:
  ActiveSet(const Eigen::MatrixXd& g, int n_eq) : n_(g.rows()), n_eq_(n_eq) {
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw NotSpd("dense QP: objective matrix is not positive definite");
    const Eigen::MatrixXd lt = llt.matrixU();
    j_ = lt.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n_, n_));
    r_ = Eigen::MatrixXd::Zero(n_, n_);
    u_ = Eigen::VectorXd::Zero(n_ + 1);
    ids_.assign(static_cast<std::size_t>(n_ + 1), -1);
  }

  Eigen::Index size() const { return iq_; }
  int id(Eigen::Index pos) const { return ids_[static_cast<std::size_t>(pos)]; }
  double& u(Eigen::Index pos) { return u_[pos]; }
  const Eigen::MatrixXd& j() const { return j_; }

  Eigen::VectorXd unconstrained(const Eigen::VectorXd& g0) const { return -(j_ * (j_.transpose() * g0)); }

  /// d = J^T np; z = primal step direction; r = dual step direction.
  void directions(const Eigen::VectorXd& np, Eigen::VectorXd& d, Eigen::VectorXd& z, Eigen::VectorXd& r) const {
    d = j_.transpose() * np;
    z = j_.rightCols(n_ - iq_) * d.tail(n_ - iq_);
    r = r_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
  }

  void set_pending(int id) {
    ids_[static_cast<std::size_t>(iq_)] = id;
    u_[iq_] = 0.0;
  }

  void dual_step(const Eigen::VectorXd& r, double t) {
    u_.head(iq_) -= t * r;
    u_[iq_] += t;
  }

  /// Appends the pending constraint; false if its normal is dependent.
  bool add(Eigen::VectorXd d) {
    for (Eigen::Index col = n_ - 1; col > iq_; --col) {
      const double h = std::hypot(d[col - 1], d[col]);
      if (h == 0.0) continue;
      const double c = d[col - 1] / h;
      const double s = d[col] / h;
      d[col - 1] = h;
      d[col] = 0.0;
      for (Eigen::Index k = 0; k < n_; ++k) {
        const double t1 = j_(k, col - 1);
        const double t2 = j_(k, col);
        j_(k, col - 1) = c * t1 + s * t2;
        j_(k, col) = s * t1 - c * t2;
      }
    }
    r_.col(iq_).head(iq_ + 1) = d.head(iq_ + 1);
    ++iq_;
    const double diag = std::abs(d[iq_ - 1]);
    if (diag <= kEps * r_norm_) return false;
    r_norm_ = std::max(r_norm_, diag);
    return true;
  }

  /// Removes the constraint at position `pos` (including a just-added
  /// degenerate one) and restores the triangular factor.
  void remove(Eigen::Index pos) {
    for (Eigen::Index i = pos; i + 1 < iq_; ++i) {
      ids_[static_cast<std::size_t>(i)] = ids_[static_cast<std::size_t>(i + 1)];
      u_[i] = u_[i + 1];
      r_.col(i) = r_.col(i + 1);
    }
    ids_[static_cast<std::size_t>(iq_ - 1)] = ids_[static_cast<std::size_t>(iq_)];
    u_[iq_ - 1] = u_[iq_];
    ids_[static_cast<std::size_t>(iq_)] = -1;
    u_[iq_] = 0.0;
    r_.col(iq_ - 1).setZero();
    --iq_;
    for (Eigen::Index row = pos; row < iq_; ++row) {
      const double h = std::hypot(r_(row, row), r_(row + 1, row));
      if (h == 0.0) continue;
      const double c = r_(row, row) / h;
      const double s = r_(row + 1, row) / h;
      r_(row, row) = h;
      r_(row + 1, row) = 0.0;
      for (Eigen::Index k = row + 1; k < iq_; ++k) {
        const double t1 = r_(row, k);
        const double t2 = r_(row + 1, k);
        r_(row, k) = c * t1 + s * t2;
        r_(row + 1, k) = s * t1 - c * t2;
      }
      for (Eigen::Index k = 0; k < n_; ++k) {
        const double t1 = j_(k, row);
        const double t2 = j_(k, row + 1);
        j_(k, row) = c * t1 + s * t2;
        j_(k, row + 1) = s * t1 - c * t2;
      }
    }
  }

  int n_eq() const { return n_eq_; }

 private:
  Eigen::Index n_;
  int n_eq_;
  Eigen::Index iq_ = 0;
  double r_norm_ = 1.0;
  Eigen::MatrixXd j_;
  Eigen::MatrixXd r_;
  Eigen::VectorXd u_;
  std::vector<int> ids_;  // < n_eq: equality row; otherwise n_eq + inequality row
};

bool negligible_direction(const Eigen::VectorXd& z, const Eigen::VectorXd& d) {
  return z.norm() <= 1e-12 * std::max(d.norm(), 1e-300) || d.norm() == 0.0;
}

}  // namespace

QpSolution solve_dense_qp(const DenseQp& qp) {
  const Eigen::Index n = qp.g.rows();
  const auto p = static_cast<int>(qp.a_eq.rows());
  const auto m = static_cast<int>(qp.a_in.rows());
  if (qp.g.cols() != n || qp.g0.size() != n || (p > 0 && qp.a_eq.cols() != n) || (m > 0 && qp.a_in.cols() != n) ||
      qp.b_eq.size() != p || qp.b_in.size() != m) {
    throw InputError("dense QP: inconsistent dimensions");
  }
  QpSolution sol;
  ActiveSet as(qp.g, p);
  Eigen::VectorXd x = as.unconstrained(qp.g0);
  Eigen::VectorXd d, z, r;

  auto finish = [&](QpStatus status) {
    sol.status = status;
    sol.x = x;
    sol.y_eq = Eigen::VectorXd::Zero(p);
    sol.y_in = Eigen::VectorXd::Zero(m);
    sol.active_in.clear();
    for (Eigen::Index pos = 0; pos < as.size(); ++pos) {
      const int id = as.id(pos);
      if (id < p) {
        sol.y_eq[id] = as.u(pos);
      } else {
        sol.y_in[id - p] = as.u(pos);
        sol.active_in.push_back(id - p);
      }
    }
    std::sort(sol.active_in.begin(), sol.active_in.end());
    sol.objective = 0.5 * x.dot(qp.g * x) + qp.g0.dot(x);
    return sol;
  };

  for (int i = 0; i < p; ++i) {
    const Eigen::VectorXd np = qp.a_eq.row(i).transpose();
    as.directions(np, d, z, r);
    const double resid = np.dot(x) - qp.b_eq[i];
    if (negligible_direction(z, d)) {
      // Dependent on earlier equalities: consistent rows are redundant.
      if (std::abs(resid) <= 1e-9 * (1.0 + std::abs(qp.b_eq[i]))) continue;
      return finish(QpStatus::Infeasible);
    }
    const double t = -resid / z.dot(np);
    x += t * z;
    as.set_pending(i);
    as.dual_step(r, t);
    if (!as.add(d)) {
      as.remove(as.size() - 1);
      return finish(QpStatus::Infeasible);
    }
  }

  std::vector<bool> active(static_cast<std::size_t>(m), false);
  std::vector<bool> excluded(static_cast<std::size_t>(m), false);
  const int max_iter = 50 * (static_cast<int>(n) + m + p) + 1000;
  auto slack = [&](int i) { return qp.a_in.row(i).dot(x) - qp.b_in[i]; };
  auto tolerance = [&](int i) {
    return 1e-12 * (1.0 + std::abs(qp.b_in[i]) + qp.a_in.row(i).cwiseAbs().dot(x.cwiseAbs()));
  };

  while (true) {
    int ip = -1;
    double worst = 0.0;
    for (int i = 0; i < m; ++i) {
      if (active[static_cast<std::size_t>(i)] || excluded[static_cast<std::size_t>(i)]) continue;
      const double s = slack(i);
      if (s < -tolerance(i) && (ip < 0 || s < worst)) {
        ip = i;
        worst = s;
      }
    }
    if (ip < 0) {
      for (int i = 0; i < m; ++i) {
        if (excluded[static_cast<std::size_t>(i)] && slack(i) < -1e6 * tolerance(i)) return finish(QpStatus::Infeasible);
      }
      return finish(QpStatus::Optimal);
    }

    const Eigen::VectorXd np = qp.a_in.row(ip).transpose();
    as.set_pending(p + ip);
    double s_ip = worst;
    while (true) {
      if (++sol.iterations > max_iter) throw MaxPivotsExceeded("dense QP: iteration limit reached");
      as.directions(np, d, z, r);
      double t1 = kInf;
      Eigen::Index drop = -1;
      for (Eigen::Index pos = 0; pos < as.size(); ++pos) {
        if (as.id(pos) < p || r[pos] <= 0.0) continue;
        const double ratio = as.u(pos) / r[pos];
        if (ratio < t1) {
          t1 = ratio;
          drop = pos;
        }
      }
      const double t2 = negligible_direction(z, d) ? kInf : -s_ip / z.dot(np);
      const double t = std::min(t1, t2);
      if (t == kInf) return finish(QpStatus::Infeasible);
      if (t2 == kInf) {
        as.dual_step(r, t);
        active[static_cast<std::size_t>(as.id(drop) - p)] = false;
        as.remove(drop);
        continue;
      }
      x += t * z;
      as.dual_step(r, t);
      if (t == t2) {
        if (as.add(d)) {
          active[static_cast<std::size_t>(ip)] = true;
        } else {
          as.remove(as.size() - 1);
          excluded[static_cast<std::size_t>(ip)] = true;
        }
        break;
      }
      active[static_cast<std::size_t>(as.id(drop) - p)] = false;
      as.remove(drop);
      s_ip = slack(ip);
    }
  }
}

}  // namespace reinsqp

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "affectpipe/errors.hpp"

namespace affectpipe {

// Sparse convex QP
//   minimize    1/2 z'Pz + q'z
//   subject to  lb <= Az <= ub
// solved by ADMM with Ruiz equilibration and an active-set polish pass.
// Fully deterministic: fixed iteration schedule, no randomized components.

struct QpProblem {
  Eigen::SparseMatrix<double> P;  // symmetric PSD
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
};

struct QpSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double relax_alpha = 1.6;
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  int max_iter = 2000;
  int check_interval = 25;
  int scaling_iters = 10;
};

enum class QpStatus { Solved, MaxIterations };

struct QpResult {
  Eigen::VectorXd z;       // primal solution
  Eigen::VectorXd y;       // constraint duals (negative at active lower bounds)
  int iterations = 0;
  QpStatus status = QpStatus::MaxIterations;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
};

namespace qpdetail {

inline double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

struct Scaling {
  Eigen::VectorXd d;  // variable scaling
  Eigen::VectorXd e;  // constraint scaling
  double c = 1.0;     // cost scaling
};

// Modified Ruiz equilibration of [[P, A'], [A, 0]] plus cost normalization.
inline Scaling ruiz_equilibrate(QpProblem& p, int iters) {
  const auto n = p.P.cols();
  const auto m = p.A.rows();
  Scaling s;
  s.d = Eigen::VectorXd::Ones(n);
  s.e = Eigen::VectorXd::Ones(m);
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd cn = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd rn = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < p.P.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator itr(p.P, j); itr; ++itr)
        cn(j) = std::max(cn(j), std::abs(itr.value()));
    for (int j = 0; j < p.A.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator itr(p.A, j); itr; ++itr) {
        cn(j) = std::max(cn(j), std::abs(itr.value()));
        rn(itr.row()) = std::max(rn(itr.row()), std::abs(itr.value()));
      }
    Eigen::VectorXd dx = cn.unaryExpr([](double v) {
      return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0;
    });
    Eigen::VectorXd de = rn.unaryExpr([](double v) {
      return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0;
    });
    p.P = dx.asDiagonal() * p.P * dx.asDiagonal();
    p.q = dx.asDiagonal() * p.q;
    p.A = de.asDiagonal() * p.A * dx.asDiagonal();
    for (int i = 0; i < m; ++i) {
      if (std::isfinite(p.lb(i))) p.lb(i) *= de(i);
      if (std::isfinite(p.ub(i))) p.ub(i) *= de(i);
    }
    s.d = s.d.cwiseProduct(dx);
    s.e = s.e.cwiseProduct(de);

    double pcol_mean = 0.0;
    for (int j = 0; j < n; ++j) {
      double mx = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator itr(p.P, j); itr; ++itr)
        mx = std::max(mx, std::abs(itr.value()));
      pcol_mean += mx;
    }
    pcol_mean /= std::max<Eigen::Index>(n, 1);
    double denom = std::max(pcol_mean, inf_norm(p.q));
    double g = denom > 1e-12 ? 1.0 / denom : 1.0;
    p.P *= g;
    p.q *= g;
    s.c *= g;
  }
  return s;
}

}  // namespace qpdetail

class QpSolver {
 public:
  explicit QpSolver(QpProblem prob, QpSettings settings = {})
      : orig_(prob), st_(settings) {}

  QpResult solve() {
    QpProblem sp = orig_;
    qpdetail::Scaling sc = qpdetail::ruiz_equilibrate(sp, st_.scaling_iters);
    const auto n = sp.P.cols();
    const auto m = sp.A.rows();

    double rho = st_.rho;
    Eigen::SparseMatrix<double> At = sp.A.transpose();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    auto factor = [&](double r) {
      Eigen::SparseMatrix<double> K = sp.P;
      Eigen::SparseMatrix<double> I(n, n);
      I.setIdentity();
      K += st_.sigma * I;
      K += r * (At * sp.A).pruned();
      ldlt.compute(K);
      if (ldlt.info() != Eigen::Success)
        fail(Errc::SolverDiverged, "KKT factorization failed");
    };
    factor(rho);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    auto project = [&](Eigen::VectorXd v) {
      for (int i = 0; i < m; ++i) v(i) = std::clamp(v(i), sp.lb(i), sp.ub(i));
      return v;
    };

    QpResult res;
    int iter = 0;
    for (iter = 1; iter <= st_.max_iter; ++iter) {
      Eigen::VectorXd rhs = st_.sigma * x - sp.q + At * (rho * w - y);
      Eigen::VectorXd xt = ldlt.solve(rhs);
      Eigen::VectorXd wt = sp.A * xt;
      x = st_.relax_alpha * xt + (1.0 - st_.relax_alpha) * x;
      Eigen::VectorXd wmix = st_.relax_alpha * wt + (1.0 - st_.relax_alpha) * w;
      Eigen::VectorXd wnew = project(wmix + y / rho);
      y += rho * (wmix - wnew);
      w = wnew;

      if (iter % st_.check_interval == 0 || iter == st_.max_iter) {
        // residuals in the original (unscaled) problem
        Eigen::VectorXd xu = sc.d.cwiseProduct(x);
        Eigen::VectorXd yu = sc.e.cwiseProduct(y) / sc.c;
        Eigen::VectorXd ax = orig_.A * xu;
        Eigen::VectorXd slack = ax;
        for (int i = 0; i < m; ++i) slack(i) = std::clamp(ax(i), orig_.lb(i), orig_.ub(i));
        double rp = qpdetail::inf_norm(ax - slack);
        Eigen::VectorXd px = orig_.P * xu;
        Eigen::VectorXd aty = orig_.A.transpose() * yu;
        double rd = qpdetail::inf_norm(px + orig_.q + aty);
        double ep = st_.eps_abs + st_.eps_rel * qpdetail::inf_norm(ax);
        double ed = st_.eps_abs +
                    st_.eps_rel * std::max({qpdetail::inf_norm(px),
                                            qpdetail::inf_norm(orig_.q),
                                            qpdetail::inf_norm(aty)});
        res.primal_residual = rp;
        res.dual_residual = rd;
        if (rp <= ep && rd <= ed) {
          res.status = QpStatus::Solved;
          break;
        }
        // deterministic rho adaptation on a fixed schedule
        if (iter % (st_.check_interval * 8) == 0 && iter < st_.max_iter) {
          double ratio = std::sqrt((rp / std::max(ep, 1e-300)) /
                                   std::max(rd / std::max(ed, 1e-300), 1e-300));
          ratio = std::clamp(ratio, 1e-3, 1e3);
          double rho_new = std::clamp(rho * ratio, 1e-6, 1e6);
          if (rho_new > rho * 5.0 || rho_new < rho / 5.0) {
            rho = rho_new;
            factor(rho);
          }
        }
      }
    }
    res.iterations = std::min(iter, st_.max_iter);
    res.z = sc.d.cwiseProduct(x);
    res.y = sc.e.cwiseProduct(y) / sc.c;

    polish(res);
    res.objective = 0.5 * res.z.dot(orig_.P * res.z) + orig_.q.dot(res.z);
    return res;
  }

  // Worst KKT violation of a candidate solution: stationarity, primal
  // feasibility, and complementary slackness.
  double kkt_residual(const QpResult& r) const {
    Eigen::VectorXd grad = orig_.P * r.z + orig_.q + orig_.A.transpose() * r.y;
    double worst = qpdetail::inf_norm(grad);
    Eigen::VectorXd ax = orig_.A * r.z;
    for (int i = 0; i < ax.size(); ++i) {
      double lo = orig_.lb(i), hi = orig_.ub(i);
      worst = std::max(worst, std::max(lo - ax(i), ax(i) - hi));
      double slack = std::min(std::isfinite(lo) ? ax(i) - lo : std::numeric_limits<double>::infinity(),
                              std::isfinite(hi) ? hi - ax(i) : std::numeric_limits<double>::infinity());
      if (std::isfinite(slack)) worst = std::max(worst, std::abs(r.y(i)) * std::max(slack, 0.0));
    }
    return worst;
  }

 private:
  struct EqSolve {
    Eigen::VectorXd z;
    Eigen::VectorXd y;
    bool ok = false;
  };

  // Equality-constrained KKT solve on a fixed active set, with small
  // quasi-definite regularization undone by iterative refinement.
  EqSolve solve_active(const std::vector<int>& active, const std::vector<bool>& at_upper) const {
    const auto n = orig_.P.cols();
    const auto k = static_cast<Eigen::Index>(active.size());
    const double delta = 1e-9;

    std::vector<Eigen::Triplet<double>> trips;
    for (int j = 0; j < orig_.P.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(orig_.P, j); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < n; ++i) trips.emplace_back(i, i, delta);
    Eigen::SparseMatrix<double> At = orig_.A.transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      int row = active[static_cast<std::size_t>(c)];
      for (Eigen::SparseMatrix<double>::InnerIterator it(At, row); it; ++it) {
        trips.emplace_back(it.row(), n + c, it.value());
        trips.emplace_back(n + c, it.row(), it.value());
      }
      trips.emplace_back(n + c, n + c, -delta);
    }
    Eigen::SparseMatrix<double> K(n + k, n + k);
    K.setFromTriplets(trips.begin(), trips.end());

    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -orig_.q;
    for (Eigen::Index c = 0; c < k; ++c) {
      int i = active[static_cast<std::size_t>(c)];
      rhs(n + c) = at_upper[static_cast<std::size_t>(c)] ? orig_.ub(i) : orig_.lb(i);
    }

    EqSolve out;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(K);
    if (lu.info() != Eigen::Success) return out;
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int refine = 0; refine < 3; ++refine) {
      Eigen::VectorXd resid = rhs - K * sol;
      resid.head(n) += delta * sol.head(n);
      resid.tail(k) -= delta * sol.tail(k);
      sol += lu.solve(resid);
    }
    out.z = sol.head(n);
    out.y = Eigen::VectorXd::Zero(orig_.A.rows());
    for (Eigen::Index c = 0; c < k; ++c)
      out.y(active[static_cast<std::size_t>(c)]) = sol(n + c);
    out.ok = true;
    return out;
  }

  // Active-set refinement seeded by the ADMM iterate: re-solve on the
  // detected active set, add violated constraints, drop wrong-signed
  // multipliers, repeat. Recovers machine-precision KKT residuals even from
  // a coarse starting point.
  void polish(QpResult& res) const {
    const double tol = 1e-9;
    std::vector<int> active;
    std::vector<bool> at_upper;
    Eigen::VectorXd ax = orig_.A * res.z;
    for (int i = 0; i < orig_.A.rows(); ++i) {
      bool low = std::isfinite(orig_.lb(i)) &&
                 (res.y(i) < -1e-10 || ax(i) - orig_.lb(i) < 1e-8);
      bool up = !low && std::isfinite(orig_.ub(i)) &&
                (res.y(i) > 1e-10 || orig_.ub(i) - ax(i) < 1e-8);
      if (low || up) {
        active.push_back(i);
        at_upper.push_back(up);
      }
    }

    QpResult best = res;
    double best_kkt = kkt_residual(res);
    for (int round = 0; round < 40; ++round) {
      EqSolve sol = solve_active(active, at_upper);
      if (!sol.ok) break;
      QpResult cand = res;
      cand.z = sol.z;
      cand.y = sol.y;
      double kkt = kkt_residual(cand);
      if (kkt < best_kkt) {
        best = cand;
        best_kkt = kkt;
        best.polished = true;
        best.status = QpStatus::Solved;
      }

      // wrong-signed multipliers leave the set, violated constraints enter
      std::vector<int> next;
      std::vector<bool> next_upper;
      std::vector<bool> in_set(static_cast<std::size_t>(orig_.A.rows()), false);
      bool changed = false;
      for (std::size_t c = 0; c < active.size(); ++c) {
        double y = sol.y(active[c]);
        bool keep = at_upper[c] ? y >= -tol : y <= tol;
        if (keep) {
          next.push_back(active[c]);
          next_upper.push_back(at_upper[c]);
          in_set[static_cast<std::size_t>(active[c])] = true;
        } else {
          changed = true;
        }
      }
      Eigen::VectorXd az = orig_.A * sol.z;
      for (int i = 0; i < orig_.A.rows(); ++i) {
        if (in_set[static_cast<std::size_t>(i)]) continue;
        if (std::isfinite(orig_.lb(i)) && az(i) < orig_.lb(i) - tol) {
          next.push_back(i);
          next_upper.push_back(false);
          changed = true;
        } else if (std::isfinite(orig_.ub(i)) && az(i) > orig_.ub(i) + tol) {
          next.push_back(i);
          next_upper.push_back(true);
          changed = true;
        }
      }
      if (!changed) break;
      active = std::move(next);
      at_upper = std::move(next_upper);
    }
    res = best;
  }

  QpProblem orig_;
  QpSettings st_;
};

}  // namespace affectpipe

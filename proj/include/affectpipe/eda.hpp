#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "affectpipe/dsp.hpp"
#include "affectpipe/errors.hpp"
#include "affectpipe/qp.hpp"

namespace affectpipe {

// Convex decomposition of skin conductance into a sparse nonnegative neural
// driver, the phasic response it produces through a biexponential (Bateman)
// impulse, and a smooth tonic level (cubic spline plus affine drift).
//
//   minimize 1/2 ||r||^2 + alpha ||driver||_1 + gamma/2 ||spline coeffs||^2
//   where    input = phasic + tonic + r,  driver >= 0

struct CvxEdaParams {
  double alpha = 8e-4;        // l1 weight on the driver
  double gamma = 1e-2;        // l2 weight on spline coefficients
  double tau0_s = 2.0;        // slow biexponential time constant
  double tau1_s = 0.7;        // fast biexponential time constant
  double delta_knot_s = 10.0; // tonic spline knot spacing
  int max_iter = 2000;
  double tolerance = 1e-8;
};

struct SolverStats {
  int iterations = 0;
  double objective = 0.0;
  std::string status;
};

struct EdaDecomposition {
  std::vector<double> tonic;
  std::vector<double> phasic;
  std::vector<double> driver;    // SMNA; nonnegative up to solver tolerance
  std::vector<double> residual;
  SolverStats solver_stats;
};

namespace edadetail {

struct BatemanArma {
  double ar[3];
  double ma[3];
};

// Discretized second-order ARMA form of the biexponential impulse response.
inline BatemanArma bateman_arma(double tau0, double tau1, double dt) {
  double a1 = 1.0 / std::min(tau1, tau0);
  double a0 = 1.0 / std::max(tau1, tau0);
  double den = (a1 - a0) * dt * dt;
  BatemanArma m;
  m.ar[0] = (a1 * dt + 2.0) * (a0 * dt + 2.0) / den;
  m.ar[1] = (2.0 * a1 * a0 * dt * dt - 8.0) / den;
  m.ar[2] = (a1 * dt - 2.0) * (a0 * dt - 2.0) / den;
  m.ma[0] = 1.0;
  m.ma[1] = 2.0;
  m.ma[2] = 1.0;
  return m;
}

// Cubic-like bump from a triangle convolved with itself, unit peak.
inline std::vector<double> spline_bump(int knot_samples) {
  std::vector<double> tri;
  for (int i = 1; i < knot_samples; ++i) tri.push_back(double(i));
  for (int i = knot_samples; i >= 1; --i) tri.push_back(double(i));
  std::vector<double> bump(2 * tri.size() - 1, 0.0);
  for (std::size_t i = 0; i < tri.size(); ++i)
    for (std::size_t j = 0; j < tri.size(); ++j) bump[i + j] += tri[i] * tri[j];
  double mx = *std::max_element(bump.begin(), bump.end());
  for (double& v : bump) v /= mx;
  return bump;
}

}  // namespace edadetail

inline EdaDecomposition cvxeda_decompose(const Segment& seg,
                                         const CvxEdaParams& params = {}) {
  if (seg.kind != SignalKind::Eda)
    fail(Errc::SchemaMismatch, "cvxeda_decompose expects an EDA segment");
  const auto n = static_cast<Eigen::Index>(seg.samples.size());
  const double fs = seg.sample_rate_hz;
  if (seg.duration_s() < 4.0)
    fail(Errc::TooShort, "cvxeda needs at least 4 s of EDA");
  const double dt = 1.0 / fs;

  auto arma = edadetail::bateman_arma(params.tau0_s, params.tau1_s, dt);

  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> ta, tm;
  for (Eigen::Index i = 2; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      ta.emplace_back(i, i - k, arma.ar[k]);
      tm.emplace_back(i, i - k, arma.ma[k]);
    }
  }
  Eigen::SparseMatrix<double> A(n, n), M(n, n);
  A.setFromTriplets(ta.begin(), ta.end());
  M.setFromTriplets(tm.begin(), tm.end());

  // tonic basis: spline bumps at every knot (dropped for very short windows)
  int knot = static_cast<int>(std::lround(params.delta_knot_s * fs));
  Eigen::Index nb = 0;
  Eigen::SparseMatrix<double> B(n, 0);
  if (knot >= 2 && n > knot) {
    std::vector<double> bump = edadetail::spline_bump(knot);
    auto half = static_cast<Eigen::Index>(bump.size() / 2);
    std::vector<Eigen::Index> knots;
    for (Eigen::Index c = 0; c < n; c += knot) knots.push_back(c);
    nb = static_cast<Eigen::Index>(knots.size());
    std::vector<Trip> tb;
    for (Eigen::Index j = 0; j < nb; ++j)
      for (Eigen::Index o = 0; o < static_cast<Eigen::Index>(bump.size()); ++o) {
        Eigen::Index row = knots[j] + o - half;
        if (row >= 0 && row < n) tb.emplace_back(row, j, bump[o]);
      }
    B.resize(n, nb);
    B.setFromTriplets(tb.begin(), tb.end());
  }

  // affine drift columns: constant and normalized time
  Eigen::MatrixXd C(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    C(i, 0) = 1.0;
    C(i, 1) = double(i + 1) / double(n);
  }

  const Eigen::Index nv = n + 2 + nb;  // [q; d; l]
  Eigen::SparseMatrix<double> G(n, nv);
  {
    std::vector<Trip> tg;
    for (int j = 0; j < M.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(M, j); it; ++it)
        tg.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < n; ++i) {
      tg.emplace_back(i, n, C(i, 0));
      tg.emplace_back(i, n + 1, C(i, 1));
    }
    for (int j = 0; j < B.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(B, j); it; ++it)
        tg.emplace_back(it.row(), n + 2 + it.col(), it.value());
    G.setFromTriplets(tg.begin(), tg.end());
  }

  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(seg.samples.data(), n);

  QpProblem prob;
  prob.P = Eigen::SparseMatrix<double>((G.transpose() * G).pruned());
  for (Eigen::Index j = 0; j < nb; ++j)
    prob.P.coeffRef(n + 2 + j, n + 2 + j) += params.gamma;
  prob.q = Eigen::VectorXd::Zero(nv);
  prob.q.head(n) = params.alpha * (A.transpose() * Eigen::VectorXd::Ones(n));
  prob.q -= G.transpose() * y;

  // driver nonnegativity; the first two ARMA rows are identically zero and
  // carry no constraint
  Eigen::SparseMatrix<double> Acon(n - 2, nv);
  {
    std::vector<Trip> tc;
    for (int j = 0; j < A.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
        if (it.row() >= 2) tc.emplace_back(it.row() - 2, it.col(), it.value());
    Acon.setFromTriplets(tc.begin(), tc.end());
  }
  prob.A = Acon;
  prob.lb = Eigen::VectorXd::Zero(n - 2);
  prob.ub = Eigen::VectorXd::Constant(n - 2, std::numeric_limits<double>::infinity());

  QpSettings settings;
  settings.max_iter = params.max_iter;
  settings.eps_abs = params.tolerance;
  settings.eps_rel = params.tolerance;
  QpSolver solver(prob, settings);
  QpResult res = solver.solve();
  double kkt = solver.kkt_residual(res);
  if (res.status != QpStatus::Solved && kkt > 1e-4)
    fail(Errc::SolverDiverged,
         "cvxeda QP did not converge (kkt residual " + format_g9(kkt) + ")");

  Eigen::VectorXd qv = res.z.head(n);
  Eigen::VectorXd dv = res.z.segment(n, 2);
  Eigen::VectorXd lv = res.z.tail(nb);
  Eigen::VectorXd driver = A * qv;
  Eigen::VectorXd phasic = M * qv;
  Eigen::VectorXd tonic = C * dv;
  if (nb > 0) tonic += B * lv;
  Eigen::VectorXd resid = y - phasic - tonic;

  EdaDecomposition out;
  auto tovec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  out.tonic = tovec(tonic);
  out.phasic = tovec(phasic);
  out.driver = tovec(driver);
  out.residual = tovec(resid);
  out.solver_stats.iterations = res.iterations;
  out.solver_stats.objective = 0.5 * resid.squaredNorm() +
                               params.alpha * driver.cwiseMax(0.0).sum() +
                               0.5 * params.gamma * lv.squaredNorm();
  out.solver_stats.status = res.status == QpStatus::Solved ? "solved" : "max_iterations";
  return out;
}

// Trapezoidal integral of the positive part of the phasic component, in
// (input units) * seconds.
inline double phasic_auc(const EdaDecomposition& d, double rate_hz) {
  if (d.phasic.size() < 2) return 0.0;
  double dt = 1.0 / rate_hz;
  double auc = 0.0;
  for (std::size_t i = 0; i + 1 < d.phasic.size(); ++i) {
    double a = std::max(d.phasic[i], 0.0);
    double b = std::max(d.phasic[i + 1], 0.0);
    auc += 0.5 * (a + b) * dt;
  }
  return auc;
}

struct DriverBurst {
  std::size_t start = 0;
  std::size_t peak = 0;
  double mass = 0.0;  // driver sum over the burst
};

// Contiguous runs of driver activity above min_height, merged when closer
// than min_gap_s. Used to count recovered SCR events.
inline std::vector<DriverBurst> driver_bursts(const EdaDecomposition& d, double rate_hz,
                                              double min_height, double min_gap_s) {
  std::vector<DriverBurst> bursts;
  auto gap = static_cast<std::size_t>(std::lround(min_gap_s * rate_hz));
  std::size_t i = 0;
  const auto& p = d.driver;
  while (i < p.size()) {
    if (p[i] <= min_height) {
      ++i;
      continue;
    }
    DriverBurst b;
    b.start = i;
    b.peak = i;
    while (i < p.size()) {
      if (p[i] > min_height) {
        b.mass += p[i];
        if (p[i] > p[b.peak]) b.peak = i;
        ++i;
      } else {
        // lookahead: merge across sub-threshold stretches shorter than the gap
        std::size_t j = i;
        while (j < p.size() && j - i < gap && p[j] <= min_height) ++j;
        if (j < p.size() && j - i < gap && p[j] > min_height) {
          i = j;
        } else {
          break;
        }
      }
    }
    bursts.push_back(b);
  }
  return bursts;
}

}  // namespace affectpipe

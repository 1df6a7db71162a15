#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "affectpipe/errors.hpp"
#include "affectpipe/model.hpp"

namespace affectpipe {

// Random-intercept linear mixed model for perceived progress:
//   progress ~ valence_z + arousal_z + time_c + valence_z:time_c + arousal_z:time_c
//              + (1 | subject)
// with per-subject z-scored emotion covariates and mean-centered time index
// (3.5 for the nominal six-interruption design).

struct SamObservation {
  std::string subject_id;
  int time_idx = 1;  // interruption index, 1-based
  double valence = 0.0;
  double arousal = 0.0;
  double progress = 0.0;
};

struct LmmObservation {
  std::string subject_id;
  int time_idx = 1;
  double valence_z = 0.0;
  double arousal_z = 0.0;
  double progress = 0.0;
  bool constant_valence = false;  // subject-constant column mapped to 0
  bool constant_arousal = false;
};

inline std::vector<SamObservation> sam_observations(const std::vector<SessionRecord>& sessions) {
  std::vector<SamObservation> out;
  for (const auto& s : sessions)
    for (std::size_t i = 0; i < s.interruptions.size(); ++i)
      out.push_back({s.subject_id, static_cast<int>(i) + 1,
                     double(s.interruptions[i].valence), double(s.interruptions[i].arousal),
                     double(s.interruptions[i].progress)});
  return out;
}

// Per-subject z-scores (population std) of valence and arousal.
inline std::vector<LmmObservation> standardize_scores(const std::vector<SamObservation>& raw) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < raw.size(); ++i) groups[raw[i].subject_id].push_back(i);

  std::vector<LmmObservation> out(raw.size());
  for (const auto& [sid, idx] : groups) {
    auto zscore = [&](auto get, auto set, auto set_flag) {
      double mean = 0.0;
      for (std::size_t i : idx) mean += get(raw[i]);
      mean /= idx.size();
      double ss = 0.0;
      for (std::size_t i : idx) ss += (get(raw[i]) - mean) * (get(raw[i]) - mean);
      double sd = std::sqrt(ss / idx.size());
      for (std::size_t i : idx) {
        set(out[i], sd > 0.0 ? (get(raw[i]) - mean) / sd : 0.0);
        set_flag(out[i], !(sd > 0.0));
      }
    };
    zscore([](const SamObservation& o) { return o.valence; },
           [](LmmObservation& o, double v) { o.valence_z = v; },
           [](LmmObservation& o, bool f) { o.constant_valence = f; });
    zscore([](const SamObservation& o) { return o.arousal; },
           [](LmmObservation& o, double v) { o.arousal_z = v; },
           [](LmmObservation& o, bool f) { o.constant_arousal = f; });
    for (std::size_t i : idx) {
      out[i].subject_id = raw[i].subject_id;
      out[i].time_idx = raw[i].time_idx;
      out[i].progress = raw[i].progress;
    }
  }
  return out;
}

inline const std::vector<std::string>& lmm_term_names() {
  static const std::vector<std::string> names = {
      "(Intercept)", "valence", "arousal", "time", "valence:time", "arousal:time"};
  return names;
}

enum class LmmMethod { REML, ML };

struct LmmFit {
  LmmMethod method = LmmMethod::REML;
  std::vector<std::string> term_names;
  Eigen::VectorXd beta;
  Eigen::VectorXd stderrs;
  double sigma2_u = 0.0;  // random-intercept variance
  double sigma2_e = 0.0;  // residual variance
  double theta = 0.0;     // sigma2_u / sigma2_e
  double loglik_reml = 0.0;
  double loglik_ml = 0.0;
  bool theta_at_bound = false;
  int profile_evaluations = 0;
  // filled by lr_test_vs_null / deviance_explained
  double lr_chi2 = 0.0;
  int lr_dof = 5;
  double lr_p = 1.0;
  std::vector<double> deviance_explained_pct;  // per non-intercept term
  double total_deviance_explained_pct = 0.0;
  // dual-convention t-test p-values per coefficient
  std::vector<double> p_upper;  // dof = n - p
  std::vector<double> p_lower;  // dof = n - p - (subjects - 1)
  int dof_upper = 0;
  int dof_lower = 0;
};

namespace lmmdetail {

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::vector<Eigen::Index>> groups;  // row indices per subject
};

inline Design build_design(const std::vector<LmmObservation>& obs,
                           const std::vector<int>& term_cols) {
  Design d;
  const auto n = static_cast<Eigen::Index>(obs.size());
  double tbar = 0.0;
  for (const auto& o : obs) tbar += o.time_idx;
  tbar /= std::max<std::size_t>(obs.size(), 1);

  Eigen::MatrixXd full(n, 6);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    double tc = o.time_idx - tbar;
    full(i, 0) = 1.0;
    full(i, 1) = o.valence_z;
    full(i, 2) = o.arousal_z;
    full(i, 3) = tc;
    full(i, 4) = o.valence_z * tc;
    full(i, 5) = o.arousal_z * tc;
    d.y(i) = o.progress;
  }
  d.x.resize(n, static_cast<Eigen::Index>(term_cols.size()));
  for (std::size_t c = 0; c < term_cols.size(); ++c) d.x.col(c) = full.col(term_cols[c]);

  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i)
    groups[obs[static_cast<std::size_t>(i)].subject_id].push_back(i);
  for (auto& [sid, rows] : groups) d.groups.push_back(rows);
  return d;
}

struct ProfileEval {
  Eigen::VectorXd beta;
  Eigen::MatrixXd xtvix;  // X' V0^-1 X
  double rss_v = 0.0;     // r' V0^-1 r at the GLS beta
  double logdet_v = 0.0;
  double loglik = 0.0;    // profiled over beta and sigma2_e
};

// Profile (restricted) log-likelihood at theta = sigma2_u / sigma2_e, with
// beta and sigma2_e concentrated out in closed form. Per-subject blocks of
// V0 = I + theta * 1 1' invert analytically.
inline ProfileEval profile_at(const Design& d, double theta, bool reml) {
  const auto n = d.x.rows();
  const auto p = d.x.cols();
  ProfileEval ev;
  Eigen::MatrixXd xtvix = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xtviy = Eigen::VectorXd::Zero(p);
  double ytviy = 0.0;
  ev.logdet_v = 0.0;
  for (const auto& rows : d.groups) {
    const auto nj = static_cast<Eigen::Index>(rows.size());
    double c = theta / (1.0 + theta * nj);
    Eigen::MatrixXd xj(nj, p);
    Eigen::VectorXd yj(nj);
    for (Eigen::Index k = 0; k < nj; ++k) {
      xj.row(k) = d.x.row(rows[k]);
      yj(k) = d.y(rows[k]);
    }
    Eigen::RowVectorXd xsum = xj.colwise().sum();
    double ysum = yj.sum();
    xtvix += xj.transpose() * xj - c * xsum.transpose() * xsum;
    xtviy += xj.transpose() * yj - c * xsum.transpose() * ysum;
    ytviy += yj.squaredNorm() - c * ysum * ysum;
    ev.logdet_v += std::log(1.0 + theta * nj);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(xtvix);
  if (lu.rank() < p)
    fail(Errc::RankDeficient, "fixed-effect design matrix is rank deficient");
  ev.beta = lu.solve(xtviy);
  ev.xtvix = xtvix;
  ev.rss_v = ytviy - 2.0 * ev.beta.dot(xtviy) + ev.beta.dot(xtvix * ev.beta);
  ev.rss_v = std::max(ev.rss_v, 1e-300);

  if (reml) {
    double df = double(n - p);
    double sigma2 = ev.rss_v / df;
    double logdet_xtvix = 0.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> plu(xtvix);
    for (Eigen::Index i = 0; i < p; ++i)
      logdet_xtvix += std::log(std::abs(plu.matrixLU()(i, i)));
    ev.loglik = -0.5 * (df * (std::log(2.0 * M_PI * sigma2) + 1.0) + ev.logdet_v +
                        logdet_xtvix);
  } else {
    double sigma2 = ev.rss_v / double(n);
    ev.loglik = -0.5 * (double(n) * (std::log(2.0 * M_PI * sigma2) + 1.0) + ev.logdet_v);
  }
  return ev;
}

struct ThetaOpt {
  double theta = 0.0;
  double loglik = 0.0;
  bool at_bound = false;
  int evaluations = 0;
};

// Grid scan over [0, 1e4] followed by golden-section refinement.
inline ThetaOpt optimize_theta(const Design& d, bool reml, double tol = 1e-8,
                               int max_evals = 500) {
  int evals = 0;
  auto obj = [&](double th) {
    ++evals;
    return profile_at(d, th, reml).loglik;
  };
  std::vector<double> grid{0.0};
  for (int k = 0; k <= 48; ++k) grid.push_back(std::pow(10.0, -4.0 + 8.0 * k / 48.0));
  std::size_t best = 0;
  double best_ll = obj(grid[0]);
  double worst_ll = best_ll;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double ll = obj(grid[i]);
    worst_ll = std::min(worst_ll, ll);
    if (ll > best_ll) {
      best_ll = ll;
      best = i;
    }
  }
  // flat profile: theta unidentifiable (e.g. one observation per subject)
  if (best_ll - worst_ll < 1e-6 * std::max(1.0, std::abs(best_ll))) {
    ThetaOpt flat;
    flat.theta = 0.0;
    flat.loglik = best_ll;
    flat.at_bound = true;
    flat.evaluations = evals;
    return flat;
  }
  double lo = best == 0 ? 0.0 : grid[best - 1];
  double hi = best + 1 < grid.size() ? grid[best + 1] : grid.back();

  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a), dd = a + gr * (b - a);
  double fc = obj(c), fd = obj(dd);
  while (b - a > tol * std::max(1.0, a) && evals < max_evals) {
    if (fc > fd) {
      b = dd;
      dd = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = obj(c);
    } else {
      a = c;
      c = dd;
      fc = fd;
      dd = a + gr * (b - a);
      fd = obj(dd);
    }
  }
  ThetaOpt opt;
  opt.theta = (a + b) / 2.0;
  double ll_mid = obj(opt.theta);
  // keep the exact boundary when it wins
  if (best_ll > ll_mid && (grid[best] == 0.0 || grid[best] == grid.back())) {
    opt.theta = grid[best];
    ll_mid = best_ll;
  }
  opt.loglik = ll_mid;
  opt.at_bound = opt.theta <= 0.0 || opt.theta >= grid.back() * (1.0 - 1e-6);
  opt.evaluations = evals;
  if (evals >= max_evals)
    fail(Errc::NotConverged, "theta profile optimization hit the evaluation cap");
  return opt;
}

inline double fit_loglik(const std::vector<LmmObservation>& obs,
                         const std::vector<int>& term_cols, bool reml) {
  Design d = build_design(obs, term_cols);
  return optimize_theta(d, reml).loglik;
}

}  // namespace lmmdetail

inline LmmFit fit_lmm(const std::vector<LmmObservation>& obs,
                      LmmMethod method = LmmMethod::REML) {
  if (obs.empty()) fail(Errc::EmptyDataset, "no observations");
  lmmdetail::Design d = lmmdetail::build_design(obs, {0, 1, 2, 3, 4, 5});
  if (d.groups.size() < 2)
    fail(Errc::RankDeficient, "need at least 2 subjects for a random intercept");

  bool reml = method == LmmMethod::REML;
  lmmdetail::ThetaOpt opt = lmmdetail::optimize_theta(d, reml);
  lmmdetail::ProfileEval ev = lmmdetail::profile_at(d, opt.theta, reml);

  LmmFit fit;
  fit.method = method;
  fit.term_names = lmm_term_names();
  fit.beta = ev.beta;
  fit.theta = opt.theta;
  fit.theta_at_bound = opt.at_bound;
  fit.profile_evaluations = opt.evaluations;
  const auto n = d.x.rows();
  const auto p = d.x.cols();
  double df = reml ? double(n - p) : double(n);
  fit.sigma2_e = ev.rss_v / df;
  fit.sigma2_u = fit.theta * fit.sigma2_e;
  if (reml) {
    fit.loglik_reml = opt.loglik;
    fit.loglik_ml = lmmdetail::optimize_theta(d, false).loglik;
  } else {
    fit.loglik_ml = opt.loglik;
    fit.loglik_reml = lmmdetail::optimize_theta(d, true).loglik;
  }

  Eigen::MatrixXd cov = fit.sigma2_e * ev.xtvix.inverse();
  fit.stderrs.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) fit.stderrs(j) = std::sqrt(cov(j, j));

  auto m = static_cast<int>(d.groups.size());
  fit.dof_upper = static_cast<int>(n - p);
  fit.dof_lower = static_cast<int>(n - p) - (m - 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    double t = fit.beta(j) / fit.stderrs(j);
    auto pval = [&](int dof) {
      if (dof <= 0) return 1.0;
      boost::math::students_t dist(dof);
      return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    };
    fit.p_upper.push_back(pval(fit.dof_upper));
    fit.p_lower.push_back(pval(fit.dof_lower));
  }
  return fit;
}

struct LrTestResult {
  double chi2 = 0.0;
  int dof = 5;
  double p = 1.0;
  double loglik_full = 0.0;
  double loglik_null = 0.0;
};

// Likelihood-ratio test of the full fixed-effect set against the
// intercept-plus-random-intercept null; both sides fit with ML.
inline LrTestResult lr_test_vs_null(const std::vector<LmmObservation>& obs) {
  LrTestResult r;
  r.loglik_full = lmmdetail::fit_loglik(obs, {0, 1, 2, 3, 4, 5}, false);
  r.loglik_null = lmmdetail::fit_loglik(obs, {0}, false);
  r.chi2 = std::max(0.0, 2.0 * (r.loglik_full - r.loglik_null));
  r.dof = 5;
  boost::math::chi_squared dist(r.dof);
  r.p = boost::math::cdf(boost::math::complement(dist, r.chi2));
  return r;
}

struct DevianceExplained {
  std::vector<std::string> terms;
  std::vector<double> pct;   // sequential share of null deviance, per term
  double total_pct = 0.0;
};

// Sequential (type-I) decomposition in the fixed term order; each share is
// the ML deviance drop when the term enters, relative to the null deviance.
inline DevianceExplained deviance_explained(const std::vector<LmmObservation>& obs) {
  DevianceExplained de;
  de.terms = {"valence", "arousal", "time", "valence:time", "arousal:time"};
  std::vector<int> cols{0};
  double dev_null = -2.0 * lmmdetail::fit_loglik(obs, cols, false);
  double prev = dev_null;
  for (int term = 1; term <= 5; ++term) {
    cols.push_back(term);
    double dev = -2.0 * lmmdetail::fit_loglik(obs, cols, false);
    de.pct.push_back((prev - dev) / dev_null * 100.0);
    prev = dev;
  }
  de.total_pct = (dev_null - prev) / dev_null * 100.0;
  return de;
}

// Full analysis: REML fit annotated with the ML likelihood-ratio test and the
// per-term deviance decomposition.
inline LmmFit analyze_lmm(const std::vector<LmmObservation>& obs) {
  LmmFit fit = fit_lmm(obs, LmmMethod::REML);
  LrTestResult lr = lr_test_vs_null(obs);
  fit.lr_chi2 = lr.chi2;
  fit.lr_dof = lr.dof;
  fit.lr_p = lr.p;
  DevianceExplained de = deviance_explained(obs);
  fit.deviance_explained_pct = de.pct;
  fit.total_deviance_explained_pct = de.total_pct;
  return fit;
}

}  // namespace affectpipe

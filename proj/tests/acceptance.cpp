// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. argv[1] is the path to the affectpipe CLI
// binary (used by the determinism criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "affectpipe/dsp.hpp"
#include "affectpipe/eda.hpp"
#include "affectpipe/eval.hpp"
#include "affectpipe/ingest.hpp"
#include "affectpipe/labeling.hpp"
#include "affectpipe/lmm.hpp"
#include "affectpipe/pipeline.hpp"
#include "affectpipe/synth.hpp"

#include "oracles.hpp"

using namespace affectpipe;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

void note(const std::string& s) { g_notes.push_back(s); }

struct Criterion {
  int index;
  std::string name;
  std::chrono::steady_clock::time_point start;
  bool ok = true;

  Criterion(int i, std::string n) : index(i), name(std::move(n)) {
    start = std::chrono::steady_clock::now();
    g_notes.clear();
  }
  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      note("FAILED: " + what);
    }
  }
  ~Criterion() {
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d [%s]: %s (%.1f s)\n", index, name.c_str(),
                ok ? "PASS" : "FAIL", secs);
    for (const auto& n : g_notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
  }
};

double round2(double v) { return std::round(v * 100.0) / 100.0; }

LabeledDataset counts_dataset(std::size_t negative, std::size_t positive) {
  LabeledDataset d;
  d.feature_names = {"x"};
  for (std::size_t i = 0; i < negative + positive; ++i) {
    DatasetRow r;
    r.subject_id = "s" + std::to_string(i % 23);
    r.obs_idx = static_cast<int>(i);
    r.features = {double(i)};
    bool pos = i >= negative;
    r.valence = pos ? ValenceLabel::Positive : ValenceLabel::Negative;
    r.arousal = pos ? ArousalLabel::High : ArousalLabel::Low;
    d.rows.push_back(std::move(r));
  }
  return d;
}

SynthConfig study_config(std::uint64_t seed, bool with_effects) {
  SynthConfig c;
  c.n_subjects = 23;
  c.n_interruptions = 6;
  c.interruption_interval_s = 20.0;  // compressed timeline, same structure
  c.seed = seed;
  if (!with_effects) {
    c.eda_scr_rate_high_arousal = c.eda_scr_rate_low_arousal;
    c.hr_delta_high_arousal = 0.0;
    c.alpha_suppression_negative_valence = 1.0;
    c.bvp_amplitude_negative_valence = 1.0;
    c.attention_delta_high_arousal = 0.0;
  }
  return c;
}

double scr_wave(double t, double tau0 = 2.0, double tau1 = 0.7) {
  if (t < 0.0) return 0.0;
  double tstar = std::log(tau0 / tau1) * tau0 * tau1 / (tau0 - tau1);
  double peak = std::exp(-tstar / tau0) - std::exp(-tstar / tau1);
  return (std::exp(-t / tau0) - std::exp(-t / tau1)) / peak;
}

// criterion 8 generator: continuous response on the model's own design
std::vector<LmmObservation> lmm_generate(const std::array<double, 6>& beta, double sigma_u,
                                         double sigma_e, std::uint64_t seed,
                                         bool theta_zero = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<SamObservation> raw;
  for (int s = 0; s < 23; ++s)
    for (int t = 1; t <= 6; ++t) {
      SamObservation o;
      o.subject_id = "s" + std::string(s < 9 ? "0" : "") + std::to_string(s + 1);
      o.time_idx = t;
      o.valence = 1 + int(rng() % 9);
      o.arousal = 1 + int(rng() % 9);
      raw.push_back(o);
    }
  auto obs = standardize_scores(raw);
  std::size_t idx = 0;
  for (int s = 0; s < 23; ++s) {
    double u = theta_zero ? 0.0 : gauss(rng) * sigma_u;
    std::vector<double> eps(6);
    double mean_eps = 0.0;
    for (auto& e : eps) {
      e = gauss(rng) * sigma_e;
      mean_eps += e / 6.0;
    }
    for (int t = 0; t < 6; ++t, ++idx) {
      auto& o = obs[idx];
      double tc = o.time_idx - 3.5;
      double e = theta_zero ? eps[t] - mean_eps : eps[t];
      o.progress = beta[0] + beta[1] * o.valence_z + beta[2] * o.arousal_z + beta[3] * tc +
                   beta[4] * o.valence_z * tc + beta[5] * o.arousal_z * tc + u + e;
    }
  }
  return obs;
}

int run_cmd(const std::string& cmd) { return std::system(cmd.c_str()); }

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";

  // ------------------------------------------------------------------ 1
  {
    Criterion c(1, "baseline metric reproduction");
    Metrics v = majority_baseline(counts_dataset(94, 44), Target::Valence);
    c.check(round2(v.precision) == 0.34, "valence precision " + format_g9(v.precision));
    c.check(round2(v.recall) == 0.50, "valence recall " + format_g9(v.recall));
    c.check(round2(v.f1) == 0.41, "valence f1 " + format_g9(v.f1));
    c.check(round2(v.accuracy) == 0.68, "valence accuracy " + format_g9(v.accuracy));
    Metrics a = majority_baseline(counts_dataset(53, 85), Target::Arousal);
    c.check(round2(a.precision) == 0.31, "arousal precision " + format_g9(a.precision));
    c.check(round2(a.recall) == 0.50, "arousal recall " + format_g9(a.recall));
    c.check(round2(a.f1) == 0.38, "arousal f1 " + format_g9(a.f1));
    c.check(round2(a.accuracy) == 0.62, "arousal accuracy " + format_g9(a.accuracy));
  }

  // ------------------------------------------------------------------ 2
  LabeledDataset effect_data, null_data;
  {
    Criterion c(2, "LOSO and hold-out structure on a 23x6 study");
    SynthStudy study = generate_study(study_config(101, true));
    PipelineOptions opt;
    opt.config = SensorConfig::EmpaticaOnly;
    opt.threads = max_threads();
    effect_data = build_dataset(study.sessions, opt).dataset;
    c.check(effect_data.size() == 138, "dataset has " + std::to_string(effect_data.size()) +
                                           " rows, wanted 138");

    EvalReport loso = loso_eval(effect_data, AlgorithmId::knn,
                                default_grid(AlgorithmId::knn), Target::Valence, 3);
    c.check(loso.runs.size() == 23,
            "LOSO produced " + std::to_string(loso.runs.size()) + " folds");
    std::set<std::string> folds;
    for (const auto& r : loso.runs) {
      folds.insert(r.fold_id);
      c.check(r.test_size == 6, "fold " + r.fold_id + " test size " +
                                    std::to_string(r.test_size));
      c.check(r.train_size == 132, "fold " + r.fold_id + " train size " +
                                       std::to_string(r.train_size));
    }
    c.check(folds.size() == 23, "subject folds not unique (leakage)");

    EvalReport hold = holdout_eval(effect_data, AlgorithmId::knn,
                                   default_grid(AlgorithmId::knn), Target::Valence, 10, 5);
    c.check(hold.runs.size() == 10,
            "hold-out produced " + std::to_string(hold.runs.size()) + " runs");
    auto counts = effect_data.class_counts(Target::Valence);
    for (int r = 0; r < 10; ++r) {
      auto [train_set, test_set] = stratified_split(effect_data, Target::Valence, 0.1, 5 + r);
      auto tc = test_set.class_counts(Target::Valence);
      for (int k = 0; k < 2; ++k) {
        double exact = counts[k] * 0.1;
        c.check(std::abs(double(tc[k]) - exact) <= 1.0,
                "run " + std::to_string(r) + " class " + std::to_string(k) +
                    " test count " + std::to_string(tc[k]));
      }
      c.check(train_set.size() + test_set.size() == effect_data.size(), "split not exhaustive");
    }
  }

  // ------------------------------------------------------------------ 3
  {
    Criterion c(3, "signal recovery vs null effects");
    SynthStudy null_study = generate_study(study_config(202, false));
    PipelineOptions opt;
    opt.config = SensorConfig::EmpaticaOnly;
    opt.threads = max_threads();
    null_data = build_dataset(null_study.sessions, opt).dataset;

    for (Target target : {Target::Valence, Target::Arousal}) {
      double baseline = majority_baseline(effect_data, target).accuracy;
      double best = 0.0;
      std::string best_alg;
      for (AlgorithmId alg : {AlgorithmId::knn, AlgorithmId::nb}) {
        EvalReport r = holdout_eval(effect_data, alg, default_grid(alg), target, 10, 7);
        if (r.mean.accuracy > best) {
          best = r.mean.accuracy;
          best_alg = algorithm_name(alg);
        }
      }
      note(std::string(target_name(target)) + ": best " + best_alg + " acc " +
           format_g9(best) + " vs baseline " + format_g9(baseline));
      c.check(best >= baseline + 0.15, std::string(target_name(target)) +
                                           " classifier gain below 0.15 over baseline");

      double null_baseline = majority_baseline(null_data, target).accuracy;
      double null_best = 0.0;
      for (AlgorithmId alg : {AlgorithmId::knn, AlgorithmId::nb}) {
        EvalReport r = holdout_eval(null_data, alg, default_grid(alg), target, 10, 7);
        null_best = std::max(null_best, r.mean.accuracy);
      }
      note(std::string(target_name(target)) + " (null): best acc " + format_g9(null_best) +
           " vs baseline " + format_g9(null_baseline));
      c.check(std::abs(null_best - null_baseline) <= 0.10,
              std::string(target_name(target)) + " null-effect accuracy strays from baseline");
    }
  }

  // ------------------------------------------------------------------ 4
  {
    Criterion c(4, "cvxEDA forward-model recovery and QP oracle");
    const double fs = 4.0;
    std::vector<double> onsets{20.0, 55.0, 90.0};
    std::vector<double> amps{0.5, 0.35, 0.6};
    std::vector<double> xs;
    for (int i = 0; i < 480; ++i) {
      double t = i / fs;
      double v = 2.0 + 0.004 * t;
      for (std::size_t k = 0; k < onsets.size(); ++k) v += amps[k] * scr_wave(t - onsets[k]);
      xs.push_back(v);
    }
    Segment seg = oracles::make_segment(SignalKind::Eda, fs, xs);
    EdaDecomposition d = cvxeda_decompose(seg);

    double maxdrv = *std::max_element(d.driver.begin(), d.driver.end());
    auto bursts = driver_bursts(d, fs, 0.02 * maxdrv, 2.0);
    c.check(std::abs(long(bursts.size()) - 3L) <= 1,
            "burst count " + std::to_string(bursts.size()) + " vs 3 embedded");

    double t_rise = std::log(2.0 / 0.7) * 2.0 * 0.7 / 1.3;
    for (std::size_t k = 0; k < onsets.size(); ++k) {
      double expect_peak_t = onsets[k] + t_rise;
      auto lo = static_cast<std::size_t>((expect_peak_t - 3.0) * fs);
      auto hi = static_cast<std::size_t>((expect_peak_t + 3.0) * fs);
      std::size_t pk = lo;
      for (std::size_t i = lo; i < hi && i < d.phasic.size(); ++i)
        if (d.phasic[i] > d.phasic[pk]) pk = i;
      c.check(std::abs(d.phasic[pk] - amps[k]) <= 0.05,
              "SCR " + std::to_string(k) + " amplitude " + format_g9(d.phasic[pk]) + " vs " +
                  format_g9(amps[k]));
      c.check(std::abs(pk / fs - expect_peak_t) <= 0.5,
              "SCR " + std::to_string(k) + " timing " + format_g9(pk / fs) + " vs " +
                  format_g9(expect_peak_t));
    }

    double range = *std::max_element(xs.begin(), xs.end()) -
                   *std::min_element(xs.begin(), xs.end());
    double rms = 0.0, mindrv = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      rms += d.residual[i] * d.residual[i];
      mindrv = std::min(mindrv, d.driver[i]);
      double recon = d.tonic[i] + d.phasic[i] + d.residual[i];
      c.check(std::abs(xs[i] - recon) <= 1e-9, "reconstruction identity violated");
    }
    rms = std::sqrt(rms / xs.size());
    c.check(rms <= 0.01 * range, "residual rms " + format_g9(rms) + " above 1% of range " +
                                     format_g9(range));
    c.check(mindrv >= -1e-6, "driver min " + format_g9(mindrv));

    CvxEdaParams prm;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 0.02);
    for (int trial = 0; trial < 2; ++trial) {
      std::vector<double> small;
      for (int i = 0; i < 56; ++i) {
        double t = i / fs;
        small.push_back(1.5 + 0.01 * t + 0.4 * scr_wave(t - 3.0) + g(rng));
      }
      EdaDecomposition ds = cvxeda_decompose(oracles::make_segment(SignalKind::Eda, fs, small), prm);
      auto oracle = oracles::solve_cvxeda_dense(small, fs, prm);
      c.check(std::abs(ds.solver_stats.objective - oracle.objective) <= 1e-6,
              "objective " + format_g9(ds.solver_stats.objective) + " vs dense oracle " +
                  format_g9(oracle.objective));
    }
  }

  // ------------------------------------------------------------------ 5
  {
    Criterion c(5, "band filters and HR derivation");
    auto bands = default_bands();
    std::vector<double> centers{2.25, 5.75, 10.0, 21.25, 37.5};
    for (std::size_t bi = 0; bi < bands.size(); ++bi) {
      Segment seg = oracles::make_segment(SignalKind::EegRaw, 512.0,
                                          oracles::sine(centers[bi], 512.0, 10.0));
      auto bp = band_powers(seg);
      double total = total_power(seg);
      double own = bp.at(bands[bi].name);
      c.check(own >= 0.90 * total, bands[bi].name + " tone keeps " +
                                       format_g9(own / total) + " of total power");
      for (std::size_t bj = 0; bj < bands.size(); ++bj) {
        if (bi == bj) continue;
        double leak = bp.at(bands[bj].name);
        double db = 10.0 * std::log10(std::max(leak, 1e-300) / own);
        c.check(db <= -20.0, bands[bi].name + " tone leaks " + format_g9(db) + " dB into " +
                                 bands[bj].name);
      }
    }
    auto pulse_train = [&](double beat_hz) {
      std::vector<double> v(64 * 20);
      for (std::size_t i = 0; i < v.size(); ++i) {
        double phase = std::fmod(i / 64.0 * beat_hz, 1.0);
        v[i] = std::exp(-std::pow((phase - 0.3) / 0.08, 2.0));
      }
      return v;
    };
    for (auto [hz, bpm] : std::vector<std::pair<double, double>>{{1.0, 60.0}, {1.5, 90.0}}) {
      auto hr = derive_hr(oracles::make_segment(SignalKind::Bvp, 64.0, pulse_train(hz)));
      for (double v : hr.hr.samples)
        c.check(std::abs(v - bpm) <= 1.0,
                format_g9(hz) + " Hz pulse train gave " + format_g9(v) + " bpm");
    }
  }

  // ------------------------------------------------------------------ 6
  {
    Criterion c(6, "feature schema and config projection");
    c.check(feature_names(SensorConfig::FullSet).size() == 32, "full set != 32 names");
    c.check(feature_names(SensorConfig::EmpaticaOnly).size() == 11, "empatica != 11 names");
    c.check(feature_names(SensorConfig::BrainlinkOnly).size() == 21, "brainlink != 21 names");

    SynthConfig cfg;
    cfg.n_subjects = 2;
    cfg.n_interruptions = 3;
    cfg.interruption_interval_s = 20.0;
    cfg.seed = 44;
    SynthStudy study = generate_study(cfg);
    PipelineOptions full_opt;
    full_opt.config = SensorConfig::FullSet;
    PipelineOptions emp_opt;
    emp_opt.config = SensorConfig::EmpaticaOnly;
    LabeledDataset full = build_dataset(study.sessions, full_opt).dataset;
    LabeledDataset emp = build_dataset(study.sessions, emp_opt).dataset;
    LabeledDataset projected = full.project(feature_names(SensorConfig::EmpaticaOnly));
    c.check(projected.size() == emp.size(), "row count mismatch");
    for (std::size_t i = 0; i < emp.size(); ++i)
      for (std::size_t j = 0; j < emp.feature_names.size(); ++j)
        c.check(projected.rows[i].features[j] == emp.rows[i].features[j],
                "bitwise mismatch at row " + std::to_string(i) + " col " +
                    emp.feature_names[j]);
  }

  // ------------------------------------------------------------------ 7
  {
    Criterion c(7, "labeling brute-force agreement");
    std::size_t cases = 0, agreed = 0;
    for (int score = 1; score <= 9; ++score) {
      for (int mk = 0; mk <= 80; ++mk) {
        double mean = 1.0 + mk * 0.1;
        Discretized d = discretize(score, mean);
        bool oracle_positive = score > mean;
        bool oracle_ambiguous = std::abs(score - mean) <= 0.5;
        ++cases;
        if (d.positive == oracle_positive && d.ambiguous == oracle_ambiguous) ++agreed;
      }
    }
    note(std::to_string(agreed) + "/" + std::to_string(cases) + " cases agree");
    c.check(agreed == cases, "discretize disagrees with the brute-force oracle");
  }

  // ------------------------------------------------------------------ 8
  {
    Criterion c(8, "mixed model: OLS match, recovery, LR test");
    const std::array<double, 6> beta{3.0, 0.17, -0.05, -0.02, 0.03, 0.02};

    auto obs0 = lmm_generate(beta, 0.0, 0.8, 11, /*theta_zero=*/true);
    LmmFit f0 = fit_lmm(obs0, LmmMethod::REML);
    Eigen::MatrixXd x(obs0.size(), 6);
    Eigen::VectorXd y(obs0.size());
    for (std::size_t i = 0; i < obs0.size(); ++i) {
      double tc = obs0[i].time_idx - 3.5;
      x(i, 0) = 1.0;
      x(i, 1) = obs0[i].valence_z;
      x(i, 2) = obs0[i].arousal_z;
      x(i, 3) = tc;
      x(i, 4) = obs0[i].valence_z * tc;
      x(i, 5) = obs0[i].arousal_z * tc;
      y(i) = obs0[i].progress;
    }
    Eigen::VectorXd ols = oracles::ols_beta(x, y);
    for (int j = 0; j < 6; ++j)
      c.check(std::abs(f0.beta(j) - ols(j)) <= 1e-6,
              "OLS mismatch at beta[" + std::to_string(j) + "]: " + format_g9(f0.beta(j)) +
                  " vs " + format_g9(ols(j)));

    Eigen::VectorXd mean_beta = Eigen::VectorXd::Zero(6);
    const int seeds = 100;
    for (int s = 0; s < seeds; ++s) {
      LmmFit fit = fit_lmm(lmm_generate(beta, 0.5, 0.8, 2000 + s), LmmMethod::REML);
      mean_beta += fit.beta / seeds;
    }
    double mae = 0.0;
    for (int j = 0; j < 6; ++j) mae += std::abs(mean_beta(j) - beta[j]) / 6.0;
    note("Monte-Carlo beta MAE over 100 seeds: " + format_g9(mae));
    c.check(mae <= 0.05, "beta recovery MAE " + format_g9(mae));

    std::array<double, 6> strong{3.0, 0.8, 0.0, 0.0, 0.0, 0.0};
    LrTestResult lr = lr_test_vs_null(lmm_generate(strong, 0.5, 0.5, 77));
    c.check(lr.dof == 5, "LR dof " + std::to_string(lr.dof));
    c.check(lr.p < 0.001, "strong effect p " + format_g9(lr.p));

    std::array<double, 6> nullbeta{3.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    int nonsig = 0;
    for (int s = 0; s < 100; ++s)
      if (lr_test_vs_null(lmm_generate(nullbeta, 0.5, 0.8, 5000 + s)).p > 0.05) ++nonsig;
    note("null-generation seeds with p>0.05: " + std::to_string(nonsig) + "/100");
    c.check(nonsig >= 90, "only " + std::to_string(nonsig) + " null seeds non-significant");
  }

  // ------------------------------------------------------------------ 9
  {
    Criterion c(9, "CLI determinism");
    if (cli.empty()) {
      c.check(false, "no CLI path given (pass the affectpipe binary as argv[1])");
    } else {
      fs::path tmp = fs::temp_directory_path() /
                     ("affectpipe_accept_" + std::to_string(std::random_device{}()));
      fs::create_directories(tmp);
      auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
      std::string base = q(cli) + " synth --subjects 3 --interruptions 3 --interval-s 20"
                                  " --seed 7 -o ";
      int rc1 = run_cmd(base + q(tmp / "s1") + " > /dev/null");
      int rc2 = run_cmd(base + q(tmp / "s2") + " > /dev/null");
      c.check(rc1 == 0 && rc2 == 0, "synth invocation failed");
      for (const char* rel :
           {"study.json", "manifests/s01.json", "traces/s01_eda.csv", "traces/s02_bvp.csv",
            "truth.json"}) {
        c.check(read_file(tmp / "s1" / rel) == read_file(tmp / "s2" / rel),
                std::string("synth output differs: ") + rel);
      }
      std::string feat = q(cli) + " features --devices empatica --study ";
      int rf1 = run_cmd(feat + q(tmp / "s1" / "study.json") + " -o " + q(tmp / "d1.csv") +
                        " > /dev/null");
      int rf2 = run_cmd(feat + q(tmp / "s1" / "study.json") + " -o " + q(tmp / "d2.csv") +
                        " > /dev/null");
      c.check(rf1 == 0 && rf2 == 0, "features invocation failed");
      c.check(read_file(tmp / "d1.csv") == read_file(tmp / "d2.csv"),
              "feature CSV differs between runs");

      std::string ev = q(cli) + " evaluate --setting holdout --runs 2 --alg knn --seed 3"
                                " --target valence --data " +
                       q(tmp / "d1.csv") + " -o ";
      int re1 = run_cmd(ev + q(tmp / "r1.json") + " > /dev/null");
      int re2 = run_cmd(ev + q(tmp / "r2.json") + " > /dev/null");
      c.check(re1 == 0 && re2 == 0, "evaluate invocation failed");
      c.check(read_file(tmp / "r1.json") == read_file(tmp / "r2.json"),
              "evaluation report differs between runs");
      fs::remove_all(tmp);
    }
  }

  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", g_failures);
  return 1;
}

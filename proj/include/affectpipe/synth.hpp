#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "affectpipe/lmm.hpp"
#include "affectpipe/model.hpp"
#include "affectpipe/util.hpp"

namespace affectpipe {

// Synthetic-study generator. Emits full sessions through the same forward
// models the pipeline inverts (biexponential SCRs, pulse-train BVP, banded
// EEG oscillators), with the latent emotional state of every
// pre-interruption window recorded as ground truth.

struct SynthConfig {
  int n_subjects = 23;
  int n_interruptions = 6;
  std::uint64_t seed = 0;
  double interruption_interval_s = 300.0;  // five minutes in the nominal design

  // effect sizes (all >= 0; zero disables the effect)
  double eda_scr_rate_high_arousal = 6.0;  // SCR bursts/min inside windows, high arousal
  double eda_scr_rate_low_arousal = 0.5;   // and under low arousal
  double hr_delta_high_arousal = 15.0;     // bpm added under high arousal
  double alpha_suppression_negative_valence = 0.5;  // relative alpha power factor
  double bvp_amplitude_negative_valence = 0.6;      // relative pulse amplitude factor
  double attention_delta_high_arousal = 8.0;        // index points

  // per-channel noise levels
  double noise_eeg = 0.2;
  double noise_eda_us = 0.003;
  double noise_bvp = 0.02;
  double noise_attention = 3.0;
  double noise_hr_bpm = 0.5;

  // progress generator (same design the mixed model fits)
  std::array<double, 6> lmm_beta = {3.0, 0.17, -0.05, -0.02, 0.03, 0.02};
  double lmm_sigma_u = 0.5;
  double lmm_sigma_e = 0.8;

  bool include_hr_trace = true;  // false exercises the BVP-derived HR path
  double scr_amplitude_us = 0.4;
  double tau0_s = 2.0;
  double tau1_s = 0.7;
};

struct WindowTruth {
  std::string subject_id;
  int obs_idx = 0;
  bool positive_valence = false;
  bool high_arousal = false;
  int scr_count = 0;  // SCR onsets embedded in the 10 s window
};

struct SynthStudy {
  std::vector<SessionRecord> sessions;
  std::vector<WindowTruth> truth;
  std::array<double, 6> lmm_beta{};
  double lmm_sigma_u = 0.0;
  double lmm_sigma_e = 0.0;
};

namespace synthdetail {

// self-contained draws so output is identical across standard libraries
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return ((eng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal(double mean = 0.0, double sd = 1.0) {
    double u1 = uniform(), u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    double limit = std::exp(-lambda), prod = uniform();
    int k = 0;
    while (prod > limit) {
      prod *= uniform();
      ++k;
    }
    return k;
  }
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

inline int clamp_round(double v, int lo, int hi) {
  return std::clamp(static_cast<int>(std::lround(v)), lo, hi);
}

// unit-peak biexponential SCR
inline double scr_kernel(double t, double tau0, double tau1) {
  if (t < 0.0) return 0.0;
  double tstar = std::log(tau0 / tau1) * tau0 * tau1 / (tau0 - tau1);
  double peak = std::exp(-tstar / tau0) - std::exp(-tstar / tau1);
  return (std::exp(-t / tau0) - std::exp(-t / tau1)) / peak;
}

// systolic upstroke plus a dicrotic bump, as a function of beat phase in [0,1)
inline double pulse_shape(double phase) {
  double sys = std::exp(-std::pow((phase - 0.25) / 0.09, 2.0));
  double dicrotic = 0.3 * std::exp(-std::pow((phase - 0.62) / 0.14, 2.0));
  return sys + dicrotic;
}

}  // namespace synthdetail

inline SynthStudy generate_study(const SynthConfig& cfg) {
  using namespace synthdetail;
  SynthStudy study;
  study.lmm_beta = cfg.lmm_beta;
  study.lmm_sigma_u = cfg.lmm_sigma_u;
  study.lmm_sigma_e = cfg.lmm_sigma_e;

  const std::int64_t epoch0 = 1700000000000;
  const double interval_ms = cfg.interruption_interval_s * 1000.0;
  const int nwin = cfg.n_interruptions;

  for (int s = 0; s < cfg.n_subjects; ++s) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
    SessionRecord rec;
    char sid[16];
    std::snprintf(sid, sizeof(sid), "s%02d", s + 1);
    rec.subject_id = sid;

    std::int64_t trace_start = epoch0;
    rec.baseline_interval = {trace_start + 5000, trace_start + 35000};
    std::int64_t task_start = trace_start + 40000;
    std::vector<std::int64_t> int_times;
    for (int w = 0; w < nwin; ++w)
      int_times.push_back(task_start + static_cast<std::int64_t>((w + 1) * interval_ms));
    std::int64_t trace_end = int_times.back() + 5000;
    double dur_s = double(trace_end - trace_start) / 1000.0;

    // subject idiosyncrasies
    double center_v = 5.0 + clamp_round(rng.uniform(-1.5, 1.5), -1, 1);
    double center_a = 5.0 + clamp_round(rng.uniform(-1.5, 1.5), -1, 1);
    double hr_base = 68.0 + rng.uniform(-4.0, 4.0);
    double tonic_base = 2.0 + rng.uniform(-0.2, 0.2);

    std::vector<bool> lat_v(nwin), lat_a(nwin);
    for (int w = 0; w < nwin; ++w) {
      lat_v[w] = rng.uniform() < 0.5;
      lat_a[w] = rng.uniform() < 0.5;
    }

    // window membership on the task clock (seconds since trace start)
    auto window_of = [&](double t_s) {
      for (int w = 0; w < nwin; ++w) {
        double end = double(int_times[w] - trace_start) / 1000.0;
        if (t_s >= end - 12.0 && t_s < end) return w;  // small margin before the report
      }
      return -1;
    };

    // --- EDA: tonic drift + SCR bursts through the biexponential kernel
    {
      double fs = 4.0;
      auto n = static_cast<std::size_t>(std::lround(dur_s * fs));
      std::vector<double> onsets_s;
      std::vector<double> amps;
      std::vector<int> counts(nwin, 0);
      for (int w = 0; w < nwin; ++w) {
        double rate_per_min =
            lat_a[w] ? cfg.eda_scr_rate_high_arousal : cfg.eda_scr_rate_low_arousal;
        int k = rng.poisson(rate_per_min * 10.0 / 60.0);
        double wend = double(int_times[w] - trace_start) / 1000.0;
        for (int e = 0; e < k; ++e) {
          onsets_s.push_back(wend - 10.0 + rng.uniform(0.5, 8.0));
          amps.push_back(cfg.scr_amplitude_us * rng.uniform(0.7, 1.3));
        }
        counts[w] = k;
      }
      // sparse background activity between windows
      int kbg = rng.poisson(0.2 * dur_s / 60.0);
      for (int e = 0; e < kbg; ++e) {
        double t = rng.uniform(5.0, dur_s - 15.0);
        if (window_of(t) < 0 && window_of(t + 8.0) < 0) {
          onsets_s.push_back(t);
          amps.push_back(cfg.scr_amplitude_us * rng.uniform(0.7, 1.3));
        }
      }
      SignalTrace tr;
      tr.kind = SignalKind::Eda;
      tr.sample_rate_hz = fs;
      tr.start_ms = trace_start;
      tr.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double t = i / fs;
        double v = tonic_base + 0.15 * std::sin(2.0 * M_PI * t / 600.0) +
                   rng.normal(0.0, cfg.noise_eda_us);
        for (std::size_t e = 0; e < onsets_s.size(); ++e)
          v += amps[e] * scr_kernel(t - onsets_s[e], cfg.tau0_s, cfg.tau1_s);
        tr.samples[i] = v;
      }
      rec.traces[SignalKind::Eda] = std::move(tr);
      for (int w = 0; w < nwin; ++w) {
        WindowTruth wt;
        wt.subject_id = rec.subject_id;
        wt.obs_idx = w;
        wt.positive_valence = lat_v[w];
        wt.high_arousal = lat_a[w];
        wt.scr_count = counts[w];
        study.truth.push_back(wt);
      }
    }

    // --- BVP and HR: phase-accumulated pulse train
    {
      double fs = 64.0;
      auto n = static_cast<std::size_t>(std::lround(dur_s * fs));
      SignalTrace bvp;
      bvp.kind = SignalKind::Bvp;
      bvp.sample_rate_hz = fs;
      bvp.start_ms = trace_start;
      bvp.samples.resize(n);
      std::vector<double> hr_inst(n);
      double phase = rng.uniform();
      for (std::size_t i = 0; i < n; ++i) {
        double t = i / fs;
        int w = window_of(t);
        double bpm = hr_base + (w >= 0 && lat_a[w] ? cfg.hr_delta_high_arousal : 0.0);
        double amp = (w >= 0 && !lat_v[w]) ? cfg.bvp_amplitude_negative_valence : 1.0;
        hr_inst[i] = bpm;
        phase += bpm / 60.0 / fs;
        if (phase >= 1.0) phase -= 1.0;
        bvp.samples[i] = amp * pulse_shape(phase) + rng.normal(0.0, cfg.noise_bvp);
      }
      rec.traces[SignalKind::Bvp] = std::move(bvp);

      if (cfg.include_hr_trace) {
        SignalTrace hr;
        hr.kind = SignalKind::Hr;
        hr.sample_rate_hz = 1.0;
        hr.start_ms = trace_start;
        auto nh = static_cast<std::size_t>(std::lround(dur_s));
        hr.samples.resize(nh);
        for (std::size_t i = 0; i < nh; ++i) {
          auto src = std::min<std::size_t>(static_cast<std::size_t>(i * fs), n - 1);
          hr.samples[i] = hr_inst[src] + rng.normal(0.0, cfg.noise_hr_bpm);
        }
        rec.traces[SignalKind::Hr] = std::move(hr);
      }
    }

    // --- EEG: banded oscillators, alpha suppressed under negative valence
    {
      double fs = 512.0;
      auto n = static_cast<std::size_t>(std::lround(dur_s * fs));
      SignalTrace eeg;
      eeg.kind = SignalKind::EegRaw;
      eeg.sample_rate_hz = fs;
      eeg.start_ms = trace_start;
      eeg.samples.resize(n);
      double ph_d = rng.uniform(0.0, 2.0 * M_PI), ph_t = rng.uniform(0.0, 2.0 * M_PI);
      double ph_a = rng.uniform(0.0, 2.0 * M_PI), ph_b = rng.uniform(0.0, 2.0 * M_PI);
      double ph_g = rng.uniform(0.0, 2.0 * M_PI);
      double alpha_scale_neg = std::sqrt(cfg.alpha_suppression_negative_valence);
      for (std::size_t i = 0; i < n; ++i) {
        double t = i / fs;
        int w = window_of(t);
        double alpha_amp = 1.5 * ((w >= 0 && !lat_v[w]) ? alpha_scale_neg : 1.0);
        eeg.samples[i] = std::sin(2.0 * M_PI * 2.0 * t + ph_d) +
                         0.8 * std::sin(2.0 * M_PI * 6.0 * t + ph_t) +
                         alpha_amp * std::sin(2.0 * M_PI * 10.0 * t + ph_a) +
                         0.5 * std::sin(2.0 * M_PI * 20.0 * t + ph_b) +
                         0.3 * std::sin(2.0 * M_PI * 35.0 * t + ph_g) +
                         rng.normal(0.0, cfg.noise_eeg);
      }
      rec.traces[SignalKind::EegRaw] = std::move(eeg);
    }

    // --- attention / meditation indices
    for (SignalKind k : {SignalKind::Attention, SignalKind::Meditation}) {
      double fs = 1.0;
      auto n = static_cast<std::size_t>(std::lround(dur_s));
      SignalTrace tr;
      tr.kind = k;
      tr.sample_rate_hz = fs;
      tr.start_ms = trace_start;
      tr.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        int w = window_of(double(i));
        double delta = 0.0;
        if (w >= 0 && k == SignalKind::Attention)
          delta = (lat_a[w] ? 1.0 : -1.0) * cfg.attention_delta_high_arousal;
        if (w >= 0 && k == SignalKind::Meditation)
          delta = (lat_v[w] ? 1.0 : -1.0) * 0.5 * cfg.attention_delta_high_arousal;
        tr.samples[i] =
            std::clamp(50.0 + delta + rng.normal(0.0, cfg.noise_attention), 0.0, 100.0);
      }
      rec.traces[k] = std::move(tr);
    }

    // --- SAM ratings aligned with the latent state
    std::vector<double> v_scores(nwin), a_scores(nwin);
    for (int w = 0; w < nwin; ++w) {
      v_scores[w] = clamp_round(center_v + (lat_v[w] ? 2.0 : -2.0) + rng.normal(0.0, 0.7), 1, 9);
      a_scores[w] = clamp_round(center_a + (lat_a[w] ? 2.0 : -2.0) + rng.normal(0.0, 0.7), 1, 9);
    }

    // --- progress from the mixed-model equation on the reported scores
    auto zscores = [&](const std::vector<double>& xs) {
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= xs.size();
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      double sd = std::sqrt(ss / xs.size());
      std::vector<double> z(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i)
        z[i] = sd > 0.0 ? (xs[i] - mean) / sd : 0.0;
      return z;
    };
    std::vector<double> vz = zscores(v_scores), az = zscores(a_scores);
    double u_subj = rng.normal(0.0, cfg.lmm_sigma_u);
    for (int w = 0; w < nwin; ++w) {
      double tc = (w + 1) - (nwin + 1) / 2.0;
      const auto& b = cfg.lmm_beta;
      double raw = b[0] + b[1] * vz[w] + b[2] * az[w] + b[3] * tc + b[4] * vz[w] * tc +
                   b[5] * az[w] * tc + u_subj + rng.normal(0.0, cfg.lmm_sigma_e);
      SamRating sam;
      sam.valence = static_cast<int>(v_scores[w]);
      sam.arousal = static_cast<int>(a_scores[w]);
      sam.progress = clamp_round(raw, 1, 5);
      sam.t_ms = int_times[w];
      rec.interruptions.push_back(sam);
    }

    // --- elicitation ratings: four videos per affect quadrant
    for (int q = 0; q < 4; ++q)
      for (int rep = 0; rep < 4; ++rep) {
        bool pos_v = q == 0 || q == 1;
        bool high_a = q == 0 || q == 2;
        int v = clamp_round(center_v + (pos_v ? 2.0 : -2.0) + rng.normal(0.0, 0.5), 1, 9);
        int a = clamp_round(center_a + (high_a ? 2.0 : -2.0) + rng.normal(0.0, 0.5), 1, 9);
        rec.elicitation_ratings.emplace_back(v, a);
      }

    study.sessions.push_back(std::move(rec));
  }
  return study;
}

}  // namespace affectpipe

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "affectpipe/dataset.hpp"
#include "affectpipe/dsp.hpp"
#include "affectpipe/eda.hpp"
#include "affectpipe/errors.hpp"

namespace affectpipe {

// One normalized multi-channel window. For the pre-interruption windows the
// interval is the 10 s before the self-report; for the baseline window it is
// the 30 s neutral segment. EDA tonic/phasic/driver are the cvxEDA component
// slices covering the same interval.
struct ObservationWindow {
  std::string subject_id;
  int obs_idx = 0;
  std::map<SignalKind, Segment> segments;
  std::vector<double> eda_tonic;
  std::vector<double> eda_phasic;
  std::vector<double> eda_driver;
  double eda_rate_hz = 4.0;
};

struct FeatureVector {
  std::string subject_id;
  int obs_idx = 0;
  SensorConfig config = SensorConfig::FullSet;
  std::vector<std::string> names;
  std::vector<double> values;
  std::set<std::string> degenerate;  // features imputed to 0 (guarded ratios, empty peak lists)
};

namespace featdetail {

inline std::vector<std::string> band_order() {
  return {"delta", "theta", "alpha", "beta", "gamma"};
}

// unordered band pairs in lexicographic name order
inline std::vector<std::pair<std::string, std::string>> band_pairs() {
  std::vector<std::string> sorted = band_order();
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = i + 1; j < sorted.size(); ++j)
      pairs.emplace_back(sorted[i], sorted[j]);
  return pairs;
}

}  // namespace featdetail

// Canonical feature order; the dataset CSV column contract.
inline std::vector<std::string> feature_names(SensorConfig config) {
  std::vector<std::string> names;
  bool brainlink = config != SensorConfig::EmpaticaOnly;
  bool empatica = config != SensorConfig::BrainlinkOnly;
  if (brainlink) {
    for (const auto& b : featdetail::band_order()) names.push_back("eeg_power_" + b);
    for (const auto& [a, b] : featdetail::band_pairs())
      names.push_back("eeg_ratio_" + a + "_" + b);
    for (const char* ch : {"attention", "meditation"}) {
      names.push_back(std::string(ch) + "_min");
      names.push_back(std::string(ch) + "_max");
      names.push_back(std::string(ch) + "_mean_diff");
    }
  }
  if (empatica) {
    names.insert(names.end(), {"eda_mean_tonic", "eda_phasic_auc", "eda_phasic_min_peak",
                               "eda_phasic_max_peak", "eda_phasic_sum_peaks"});
    names.insert(names.end(), {"bvp_min_peak", "bvp_max_peak", "bvp_sum_peaks",
                               "bvp_mean_peak_amp_diff"});
    names.insert(names.end(), {"hr_mean_diff", "hr_variance_diff"});
  }
  return names;
}

namespace featdetail {

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

inline const Segment& need(const ObservationWindow& w, SignalKind k) {
  auto it = w.segments.find(k);
  if (it == w.segments.end())
    fail(Errc::MissingKind, std::string("window for ") + w.subject_id + " obs " +
                                std::to_string(w.obs_idx) + " lacks kind " + kind_name(k));
  return it->second;
}

struct PeakStats {
  double min = 0.0, max = 0.0, sum = 0.0, mean = 0.0;
  bool empty = true;
};

inline PeakStats peak_stats(const std::vector<Peak>& peaks) {
  PeakStats s;
  if (peaks.empty()) return s;
  s.empty = false;
  s.min = peaks.front().amplitude;
  s.max = peaks.front().amplitude;
  for (const auto& p : peaks) {
    s.min = std::min(s.min, p.amplitude);
    s.max = std::max(s.max, p.amplitude);
    s.sum += p.amplitude;
  }
  s.mean = s.sum / peaks.size();
  return s;
}

// systolic peaks of a band-limited BVP window
inline PeakStats bvp_peaks(const Segment& bvp) {
  Segment filt = bvp;
  filt.samples = filtfilt(butter_bandpass(0.7, 3.5, bvp.sample_rate_hz), bvp.samples);
  return peak_stats(detect_peaks(filt, 0.0, 60000.0 / 220.0));
}

}  // namespace featdetail

// Table of per-window features under a sensor configuration. Differences are
// oriented baseline - task throughout.
inline FeatureVector extract_features(const ObservationWindow& task,
                                      const ObservationWindow& baseline,
                                      SensorConfig config) {
  using namespace featdetail;
  FeatureVector fv;
  fv.subject_id = task.subject_id;
  fv.obs_idx = task.obs_idx;
  fv.config = config;
  fv.names = feature_names(config);

  std::map<std::string, double> vals;
  bool brainlink = config != SensorConfig::EmpaticaOnly;
  bool empatica = config != SensorConfig::BrainlinkOnly;

  if (brainlink) {
    auto powers = band_powers(need(task, SignalKind::EegRaw));
    for (const auto& b : band_order()) vals["eeg_power_" + b] = powers.at(b);
    for (const auto& [a, b] : band_pairs()) {
      std::string name = "eeg_ratio_" + a + "_" + b;
      if (powers.at(b) < 1e-12) {
        vals[name] = 0.0;
        fv.degenerate.insert(name);
      } else {
        vals[name] = powers.at(a) / powers.at(b);
      }
    }
    for (SignalKind k : {SignalKind::Attention, SignalKind::Meditation}) {
      const Segment& ts = need(task, k);
      const Segment& bs = need(baseline, k);
      if (ts.samples.empty()) fail(Errc::InsufficientData, "empty task window");
      std::string ch = kind_name(k);
      vals[ch + "_min"] = *std::min_element(ts.samples.begin(), ts.samples.end());
      vals[ch + "_max"] = *std::max_element(ts.samples.begin(), ts.samples.end());
      vals[ch + "_mean_diff"] = mean_of(bs.samples) - mean_of(ts.samples);
    }
  }

  if (empatica) {
    need(task, SignalKind::Eda);  // EDA trace must back the decomposition slices
    vals["eda_mean_tonic"] = mean_of(task.eda_tonic);
    EdaDecomposition slice;
    slice.phasic = task.eda_phasic;
    vals["eda_phasic_auc"] = phasic_auc(slice, task.eda_rate_hz);
    Segment ph;
    ph.kind = SignalKind::Eda;
    ph.sample_rate_hz = task.eda_rate_hz;
    ph.samples = task.eda_phasic;
    auto ps = peak_stats(detect_peaks(ph, 0.01, 0.0));
    if (ps.empty) {
      fv.degenerate.insert("eda_phasic_min_peak");
      fv.degenerate.insert("eda_phasic_max_peak");
      fv.degenerate.insert("eda_phasic_sum_peaks");
    }
    vals["eda_phasic_min_peak"] = ps.min;
    vals["eda_phasic_max_peak"] = ps.max;
    vals["eda_phasic_sum_peaks"] = ps.sum;

    auto tb = bvp_peaks(need(task, SignalKind::Bvp));
    auto bb = bvp_peaks(need(baseline, SignalKind::Bvp));
    if (tb.empty) {
      fv.degenerate.insert("bvp_min_peak");
      fv.degenerate.insert("bvp_max_peak");
      fv.degenerate.insert("bvp_sum_peaks");
    }
    vals["bvp_min_peak"] = tb.min;
    vals["bvp_max_peak"] = tb.max;
    vals["bvp_sum_peaks"] = tb.sum;
    vals["bvp_mean_peak_amp_diff"] = bb.mean - tb.mean;

    const Segment& ht = need(task, SignalKind::Hr);
    const Segment& hb = need(baseline, SignalKind::Hr);
    ChannelStats st_t = compute_stats(ht.samples);
    ChannelStats st_b = compute_stats(hb.samples);
    vals["hr_mean_diff"] = st_b.mean - st_t.mean;
    vals["hr_variance_diff"] =
        st_b.stddev * st_b.stddev - st_t.stddev * st_t.stddev;
  }

  fv.values.reserve(fv.names.size());
  for (const auto& n : fv.names) {
    double v = vals.at(n);
    if (!std::isfinite(v)) {
      v = 0.0;
      fv.degenerate.insert(n);
    }
    fv.values.push_back(v);
  }
  return fv;
}

}  // namespace affectpipe

#include <catch2/catch_amalgamated.hpp>

#include "affectpipe/features.hpp"
#include "affectpipe/pipeline.hpp"
#include "affectpipe/synth.hpp"
#include "oracles.hpp"

using namespace affectpipe;
using Catch::Approx;

namespace {

// hand-built window with deterministic content in every channel
ObservationWindow test_window(double eeg_tone_hz, double level) {
  ObservationWindow w;
  w.subject_id = "s01";
  w.obs_idx = 0;
  w.segments[SignalKind::EegRaw] =
      oracles::make_segment(SignalKind::EegRaw, 512.0, oracles::sine(eeg_tone_hz, 512.0, 10.0));
  std::vector<double> att, med;
  for (int i = 0; i < 10; ++i) {
    att.push_back(level + i % 3);
    med.push_back(level - i % 2);
  }
  w.segments[SignalKind::Attention] = oracles::make_segment(SignalKind::Attention, 1.0, att);
  w.segments[SignalKind::Meditation] = oracles::make_segment(SignalKind::Meditation, 1.0, med);

  std::vector<double> bvp;
  for (int i = 0; i < 640; ++i) {
    double phase = std::fmod(i / 64.0, 1.0);
    bvp.push_back(std::exp(-std::pow((phase - 0.3) / 0.08, 2.0)));
  }
  w.segments[SignalKind::Bvp] = oracles::make_segment(SignalKind::Bvp, 64.0, bvp);
  w.segments[SignalKind::Eda] =
      oracles::make_segment(SignalKind::Eda, 4.0, std::vector<double>(40, level));
  std::vector<double> hr(10, 60.0 + level);
  w.segments[SignalKind::Hr] = oracles::make_segment(SignalKind::Hr, 1.0, hr);

  w.eda_tonic.assign(40, level);
  w.eda_phasic.assign(40, 0.0);
  w.eda_driver.assign(40, 0.0);
  w.eda_rate_hz = 4.0;
  return w;
}

}  // namespace

TEST_CASE("feature name counts per sensor configuration") {
  REQUIRE(feature_names(SensorConfig::FullSet).size() == 32);
  REQUIRE(feature_names(SensorConfig::EmpaticaOnly).size() == 11);
  REQUIRE(feature_names(SensorConfig::BrainlinkOnly).size() == 21);

  // full = brainlink then empatica, in canonical order
  auto full = feature_names(SensorConfig::FullSet);
  auto brain = feature_names(SensorConfig::BrainlinkOnly);
  auto emp = feature_names(SensorConfig::EmpaticaOnly);
  REQUIRE(std::equal(brain.begin(), brain.end(), full.begin()));
  REQUIRE(std::equal(emp.begin(), emp.end(), full.begin() + brain.size()));
}

TEST_CASE("identical task and baseline windows zero every diff feature") {
  ObservationWindow w = test_window(10.0, 2.0);
  FeatureVector fv = extract_features(w, w, SensorConfig::FullSet);
  for (std::size_t i = 0; i < fv.names.size(); ++i) {
    if (fv.names[i].find("_diff") != std::string::npos)
      REQUIRE(fv.values[i] == Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("a pure alpha tone dominates the band powers and the alpha/theta ratio") {
  ObservationWindow w = test_window(10.0, 2.0);
  FeatureVector fv = extract_features(w, w, SensorConfig::BrainlinkOnly);
  auto value = [&](const std::string& n) {
    auto it = std::find(fv.names.begin(), fv.names.end(), n);
    REQUIRE(it != fv.names.end());
    return fv.values[static_cast<std::size_t>(it - fv.names.begin())];
  };
  double alpha = value("eeg_power_alpha");
  for (const char* b : {"delta", "theta", "beta", "gamma"})
    REQUIRE(alpha > value(std::string("eeg_power_") + b));
  REQUIRE(value("eeg_ratio_alpha_theta") > 1.0);
}

TEST_CASE("phasic peak features summarize the detected peaks") {
  ObservationWindow w = test_window(10.0, 2.0);
  // two isolated phasic bumps with heights 0.2 and 0.5
  w.eda_phasic.assign(40, 0.0);
  w.eda_phasic[10] = 0.2;
  w.eda_phasic[25] = 0.5;
  FeatureVector fv = extract_features(w, w, SensorConfig::EmpaticaOnly);
  auto value = [&](const std::string& n) {
    auto it = std::find(fv.names.begin(), fv.names.end(), n);
    return fv.values[static_cast<std::size_t>(it - fv.names.begin())];
  };
  REQUIRE(value("eda_phasic_min_peak") == Approx(0.2));
  REQUIRE(value("eda_phasic_max_peak") == Approx(0.5));
  REQUIRE(value("eda_phasic_sum_peaks") == Approx(0.7));
  // empty peak list imputes zeros with a degenerate flag
  w.eda_phasic.assign(40, 0.0);
  FeatureVector fv0 = extract_features(w, w, SensorConfig::EmpaticaOnly);
  REQUIRE(fv0.degenerate.count("eda_phasic_max_peak") == 1);
  REQUIRE(value("eda_phasic_min_peak") >= 0.0);
}

TEST_CASE("feature extraction is bit-deterministic") {
  ObservationWindow w = test_window(10.0, 2.0);
  ObservationWindow b = test_window(10.0, 1.0);
  FeatureVector f1 = extract_features(w, b, SensorConfig::FullSet);
  FeatureVector f2 = extract_features(w, b, SensorConfig::FullSet);
  REQUIRE(f1.values == f2.values);
  REQUIRE(f1.names == f2.names);
}

TEST_CASE("missing required kind raises MissingKind") {
  ObservationWindow w = test_window(10.0, 2.0);
  ObservationWindow b = test_window(10.0, 2.0);
  w.segments.erase(SignalKind::Bvp);
  REQUIRE_THROWS_AS(extract_features(w, b, SensorConfig::EmpaticaOnly), Error);
}

TEST_CASE("full-set projection equals the directly computed empatica vector") {
  SynthConfig cfg;
  cfg.n_subjects = 1;
  cfg.n_interruptions = 2;
  cfg.interruption_interval_s = 20.0;
  cfg.seed = 42;
  SynthStudy study = generate_study(cfg);

  PipelineOptions full_opt;
  full_opt.config = SensorConfig::FullSet;
  PipelineOptions emp_opt;
  emp_opt.config = SensorConfig::EmpaticaOnly;

  SessionWindows wf = build_observation_windows(study.sessions[0], full_opt);
  SessionWindows we = build_observation_windows(study.sessions[0], emp_opt);

  auto emp_names = feature_names(SensorConfig::EmpaticaOnly);
  for (std::size_t i = 0; i < wf.windows.size(); ++i) {
    FeatureVector fv_full = extract_features(wf.windows[i], wf.baseline, SensorConfig::FullSet);
    FeatureVector fv_emp = extract_features(we.windows[i], we.baseline,
                                            SensorConfig::EmpaticaOnly);
    for (std::size_t j = 0; j < emp_names.size(); ++j) {
      auto it = std::find(fv_full.names.begin(), fv_full.names.end(), emp_names[j]);
      double projected = fv_full.values[static_cast<std::size_t>(it - fv_full.names.begin())];
      REQUIRE(projected == fv_emp.values[j]);  // bit-for-bit
    }
  }
}

TEST_CASE("ratio guard imputes zero on vanishing denominators") {
  ObservationWindow w = test_window(10.0, 2.0);
  // silence -> every band power ~ 0 -> all ratios guarded
  w.segments[SignalKind::EegRaw] =
      oracles::make_segment(SignalKind::EegRaw, 512.0, std::vector<double>(5120, 0.0));
  FeatureVector fv = extract_features(w, w, SensorConfig::BrainlinkOnly);
  for (std::size_t i = 0; i < fv.names.size(); ++i)
    if (fv.names[i].rfind("eeg_ratio_", 0) == 0) {
      REQUIRE(fv.values[i] == 0.0);
      REQUIRE(fv.degenerate.count(fv.names[i]) == 1);
    }
}

#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "affectpipe/dsp.hpp"
#include "affectpipe/eda.hpp"
#include "affectpipe/errors.hpp"
#include "affectpipe/features.hpp"
#include "affectpipe/labeling.hpp"
#include "affectpipe/model.hpp"
#include "affectpipe/util.hpp"

namespace affectpipe {

struct PipelineOptions {
  SensorConfig config = SensorConfig::FullSet;
  CvxEdaParams eda;
  // Decompose the whole normalized EDA trace once and slice per window;
  // set false to decompose each 10 s window independently.
  bool decompose_whole_trace = true;
  std::int64_t window_ms = 10000;
  int threads = 1;
};

struct SessionWindows {
  ObservationWindow baseline;             // the 30 s neutral window
  std::vector<ObservationWindow> windows;  // one per interruption
};

namespace pipedetail {

struct EdaContext {
  EdaDecomposition whole;  // when decomposing the whole trace
  const SignalTrace* trace = nullptr;
  BaselineStats stats;
  CvxEdaParams params;
  bool whole_trace = false;
};

inline void fill_eda_slices(ObservationWindow& w, const EdaContext& ctx,
                            std::int64_t t0_ms, std::int64_t t1_ms) {
  const SignalTrace& tr = *ctx.trace;
  if (ctx.whole_trace) {
    double period = tr.period_ms();
    auto i0 = static_cast<std::size_t>(
        std::ceil((double(t0_ms) - tr.start_ms) / period - 1e-9));
    auto i1 = static_cast<std::size_t>(
        std::ceil((double(t1_ms) - tr.start_ms) / period - 1e-9));
    i1 = std::min(i1, ctx.whole.phasic.size());
    w.eda_tonic.assign(ctx.whole.tonic.begin() + i0, ctx.whole.tonic.begin() + i1);
    w.eda_phasic.assign(ctx.whole.phasic.begin() + i0, ctx.whole.phasic.begin() + i1);
    w.eda_driver.assign(ctx.whole.driver.begin() + i0, ctx.whole.driver.begin() + i1);
  } else {
    Segment seg = zscore_normalize(extract_window(tr, t1_ms, t1_ms - t0_ms), ctx.stats);
    EdaDecomposition d = cvxeda_decompose(seg, ctx.params);
    w.eda_tonic = std::move(d.tonic);
    w.eda_phasic = std::move(d.phasic);
    w.eda_driver = std::move(d.driver);
  }
  w.eda_rate_hz = tr.sample_rate_hz;
}

}  // namespace pipedetail

// Builds the normalized baseline window and one normalized window per
// interruption for a single session. HR is taken from the HR trace when
// present, otherwise derived from raw BVP; either way it is z-scored against
// baseline statistics like every other channel.
inline SessionWindows build_observation_windows(const SessionRecord& s,
                                                const PipelineOptions& opt) {
  ValidationReport vr = validate_session(s, opt.config);
  if (!vr.ok()) {
    const Violation& v = vr.violations.front();
    fail(Errc::ParseError, "session " + s.subject_id + " failed validation: " + v.field +
                               " (" + v.rule + ") value=" + v.value);
  }

  std::vector<SignalKind> needed = kinds_for(opt.config);
  bool derive_hr_from_bvp = std::count(needed.begin(), needed.end(), SignalKind::Hr) &&
                            !s.traces.count(SignalKind::Hr);

  BaselineStats stats = baseline_stats(s);

  // derived HR baseline: run the BVP-based derivation over the baseline
  // interval and use its statistics for normalization
  Segment hr_baseline_raw;
  if (derive_hr_from_bvp) {
    Segment bvp_base = extract_window(*s.trace(SignalKind::Bvp), s.baseline_interval.t1_ms,
                                      s.baseline_interval.length_ms());
    hr_baseline_raw = derive_hr(bvp_base).hr;
    stats.per_kind[SignalKind::Hr] = compute_stats(hr_baseline_raw.samples);
  }

  pipedetail::EdaContext eda_ctx;
  bool need_eda = std::count(needed.begin(), needed.end(), SignalKind::Eda) > 0;
  if (need_eda) {
    const SignalTrace& tr = *s.trace(SignalKind::Eda);
    eda_ctx.trace = &tr;
    eda_ctx.stats = stats;
    eda_ctx.params = opt.eda;
    eda_ctx.whole_trace = opt.decompose_whole_trace;
    if (opt.decompose_whole_trace) {
      Segment whole;
      whole.kind = SignalKind::Eda;
      whole.sample_rate_hz = tr.sample_rate_hz;
      whole.samples = tr.samples;
      whole.t0_ms = double(tr.start_ms);
      whole.t1_ms = tr.end_ms();
      eda_ctx.whole = cvxeda_decompose(zscore_normalize(whole, stats), opt.eda);
    }
  }

  auto build_window = [&](std::int64_t t_end, std::int64_t duration, int obs_idx) {
    ObservationWindow w;
    w.subject_id = s.subject_id;
    w.obs_idx = obs_idx;
    for (SignalKind k : needed) {
      if (k == SignalKind::Hr && derive_hr_from_bvp) {
        Segment bvp_raw = extract_window(*s.trace(SignalKind::Bvp), t_end, duration);
        w.segments[k] = zscore_normalize(derive_hr(bvp_raw).hr, stats);
        continue;
      }
      const SignalTrace* tr = s.trace(k);
      if (!tr)
        fail(Errc::MissingKind, "session " + s.subject_id + " lacks trace " + kind_name(k));
      w.segments[k] = zscore_normalize(extract_window(*tr, t_end, duration), stats);
    }
    if (need_eda) pipedetail::fill_eda_slices(w, eda_ctx, t_end - duration, t_end);
    return w;
  };

  SessionWindows out;
  out.baseline = build_window(s.baseline_interval.t1_ms, s.baseline_interval.length_ms(), -1);
  for (std::size_t i = 0; i < s.interruptions.size(); ++i)
    out.windows.push_back(
        build_window(s.interruptions[i].t_ms, opt.window_ms, static_cast<int>(i)));
  return out;
}

// Full pipeline: window extraction, feature computation, gold labeling.
// Sessions must arrive sorted by subject_id so that dataset rows land in
// canonical order.
inline BuildGoldResult build_dataset(const std::vector<SessionRecord>& sessions,
                                     const PipelineOptions& opt,
                                     const OverrideMap& overrides = {},
                                     bool strict = false) {
  for (std::size_t i = 0; i + 1 < sessions.size(); ++i)
    if (sessions[i].subject_id > sessions[i + 1].subject_id)
      fail(Errc::SchemaMismatch, "sessions must be sorted by subject_id");
  std::vector<std::vector<FeatureVector>> per_session(sessions.size());
  parallel_for(
      sessions.size(),
      [&](std::size_t i) {
        SessionWindows sw = build_observation_windows(sessions[i], opt);
        for (const auto& w : sw.windows)
          per_session[i].push_back(extract_features(w, sw.baseline, opt.config));
      },
      opt.threads);

  std::vector<FeatureVector> features;
  for (auto& fs : per_session)
    for (auto& f : fs) features.push_back(std::move(f));

  std::map<std::string, ElicitationProfile> profiles;
  for (const auto& s : sessions)
    profiles[s.subject_id] = elicitation_means(s.subject_id, s.elicitation_ratings);

  return build_gold(sessions, profiles, features, overrides, strict);
}

}  // namespace affectpipe

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "affectpipe/errors.hpp"
#include "affectpipe/util.hpp"

namespace affectpipe {

enum class SignalKind { EegRaw, Attention, Meditation, Eda, Bvp, Hr };

inline constexpr std::array<SignalKind, 6> kAllKinds = {
    SignalKind::EegRaw, SignalKind::Attention, SignalKind::Meditation,
    SignalKind::Eda,    SignalKind::Bvp,       SignalKind::Hr};

inline const char* kind_name(SignalKind k) {
  switch (k) {
    case SignalKind::EegRaw: return "eeg_raw";
    case SignalKind::Attention: return "attention";
    case SignalKind::Meditation: return "meditation";
    case SignalKind::Eda: return "eda";
    case SignalKind::Bvp: return "bvp";
    case SignalKind::Hr: return "hr";
  }
  return "?";
}

inline std::optional<SignalKind> kind_from_name(const std::string& s) {
  for (SignalKind k : kAllKinds)
    if (s == kind_name(k)) return k;
  return std::nullopt;
}

// Device-nominal sampling rates. Attention/meditation/HR are derived channels
// reported once per second.
inline double nominal_rate_hz(SignalKind k) {
  switch (k) {
    case SignalKind::EegRaw: return 512.0;
    case SignalKind::Eda: return 4.0;
    case SignalKind::Bvp: return 64.0;
    default: return 1.0;
  }
}

// Interval on the shared epoch-ms clock, half-open [t0, t1).
struct TimeInterval {
  std::int64_t t0_ms = 0;
  std::int64_t t1_ms = 0;
  std::int64_t length_ms() const { return t1_ms - t0_ms; }
  bool overlaps(std::int64_t a_ms, std::int64_t b_ms) const {
    return t0_ms < b_ms && a_ms < t1_ms;
  }
};

// One sensor channel on a uniform sample grid. Sample i sits at
// start_ms + i * 1000 / sample_rate_hz. Holes in the source recording are kept
// as gap intervals; the grid slots under a gap hold the last value seen and
// must not be consumed (windows overlapping a gap are rejected downstream).
struct SignalTrace {
  SignalKind kind = SignalKind::Eda;
  double sample_rate_hz = 0.0;
  std::int64_t start_ms = 0;
  std::vector<double> samples;
  std::vector<TimeInterval> gaps;

  double period_ms() const { return 1000.0 / sample_rate_hz; }
  double time_of_ms(std::size_t i) const { return static_cast<double>(start_ms) + i * period_ms(); }
  double end_ms() const { return time_of_ms(samples.size()); }

  bool covers(std::int64_t a_ms, std::int64_t b_ms) const {
    return static_cast<double>(start_ms) <= a_ms && b_ms <= end_ms();
  }
  bool has_gap_in(std::int64_t a_ms, std::int64_t b_ms) const {
    for (const auto& g : gaps)
      if (g.overlaps(a_ms, b_ms)) return true;
    return false;
  }
};

// One experience-sampling interruption: SAM valence/arousal on 1..9 and
// perceived progress on 1..5.
struct SamRating {
  int valence = 0;
  int arousal = 0;
  int progress = 0;
  std::int64_t t_ms = 0;
};

struct SessionRecord {
  std::string subject_id;
  std::map<SignalKind, SignalTrace> traces;
  TimeInterval baseline_interval;  // 30 s neutral segment before the task
  std::vector<SamRating> interruptions;
  std::vector<std::pair<int, int>> elicitation_ratings;  // 16 (valence, arousal) pairs

  const SignalTrace* trace(SignalKind k) const {
    auto it = traces.find(k);
    return it == traces.end() ? nullptr : &it->second;
  }
};

enum class SensorConfig { FullSet, EmpaticaOnly, BrainlinkOnly };

inline const char* sensor_config_name(SensorConfig c) {
  switch (c) {
    case SensorConfig::FullSet: return "full";
    case SensorConfig::EmpaticaOnly: return "empatica";
    case SensorConfig::BrainlinkOnly: return "brainlink";
  }
  return "?";
}

inline std::optional<SensorConfig> sensor_config_from_name(const std::string& s) {
  if (s == "full") return SensorConfig::FullSet;
  if (s == "empatica") return SensorConfig::EmpaticaOnly;
  if (s == "brainlink") return SensorConfig::BrainlinkOnly;
  return std::nullopt;
}

// Channels a configuration draws features from. HR may alternatively be
// derived from BVP, so it is not a hard requirement when BVP is present.
inline std::vector<SignalKind> kinds_for(SensorConfig c) {
  switch (c) {
    case SensorConfig::EmpaticaOnly:
      return {SignalKind::Eda, SignalKind::Bvp, SignalKind::Hr};
    case SensorConfig::BrainlinkOnly:
      return {SignalKind::EegRaw, SignalKind::Attention, SignalKind::Meditation};
    case SensorConfig::FullSet:
      return {SignalKind::EegRaw, SignalKind::Attention, SignalKind::Meditation,
              SignalKind::Eda, SignalKind::Bvp, SignalKind::Hr};
  }
  return {};
}

struct Violation {
  std::string field;
  std::string rule;
  std::string value;
  bool warning = false;  // warnings do not make a session unusable
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const {
    for (const auto& v : violations)
      if (!v.warning) return false;
    return true;
  }
  bool empty() const { return violations.empty(); }
};

namespace detail {
inline void check_trace(const SignalTrace& t, ValidationReport& r) {
  std::string field = std::string("traces.") + kind_name(t.kind);
  if (t.samples.empty())
    r.violations.push_back({field, "samples non-empty", "0 samples"});
  if (!(t.sample_rate_hz > 0.0))
    r.violations.push_back({field, "sample_rate_hz > 0", format_g9(t.sample_rate_hz)});
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    if (!std::isfinite(t.samples[i])) {
      r.violations.push_back({field, "no NaN/Inf", "sample " + std::to_string(i)});
      break;
    }
  }
}
}  // namespace detail

// Pure structural validation. Report order is deterministic: fields in
// declaration order, then time order within a field. Violations are data,
// not failures; an empty report means every structural invariant holds.
inline ValidationReport validate_session(const SessionRecord& s,
                                         SensorConfig required = SensorConfig::FullSet) {
  ValidationReport r;
  if (s.subject_id.empty())
    r.violations.push_back({"subject_id", "non-empty", ""});

  for (SignalKind k : kAllKinds) {
    auto it = s.traces.find(k);
    if (it != s.traces.end()) detail::check_trace(it->second, r);
  }
  for (SignalKind k : kinds_for(required)) {
    if (s.traces.count(k)) continue;
    // HR can be derived from BVP, so only flag it when BVP is also absent.
    if (k == SignalKind::Hr && s.traces.count(SignalKind::Bvp)) continue;
    r.violations.push_back({"traces", "missing kind " + std::string(kind_name(k)),
                            sensor_config_name(required)});
  }

  if (s.baseline_interval.length_ms() != 30000)
    r.violations.push_back({"baseline_interval", "length 30000 ms",
                            std::to_string(s.baseline_interval.length_ms()) + " ms"});
  for (const auto& [k, t] : s.traces) {
    if (!t.samples.empty() && !t.covers(s.baseline_interval.t0_ms, s.baseline_interval.t1_ms))
      r.violations.push_back({"baseline_interval",
                              "covered by trace " + std::string(kind_name(k)), ""});
  }

  if (s.interruptions.size() != 6)
    r.violations.push_back({"interruptions", "nominally 6 per session",
                            std::to_string(s.interruptions.size()), /*warning=*/true});
  for (std::size_t i = 0; i + 1 < s.interruptions.size(); ++i) {
    if (s.interruptions[i].t_ms > s.interruptions[i + 1].t_ms) {
      r.violations.push_back({"interruptions", "sorted by time",
                              "index " + std::to_string(i + 1)});
      break;
    }
  }
  if (!s.interruptions.empty() &&
      s.baseline_interval.t1_ms > s.interruptions.front().t_ms)
    r.violations.push_back({"interruptions", "baseline precedes first interruption",
                            std::to_string(s.interruptions.front().t_ms)});
  for (std::size_t i = 0; i < s.interruptions.size(); ++i) {
    const auto& sam = s.interruptions[i];
    auto idx = std::to_string(i);
    if (sam.valence < 1 || sam.valence > 9)
      r.violations.push_back({"interruptions[" + idx + "].valence", "in 1..9",
                              std::to_string(sam.valence)});
    if (sam.arousal < 1 || sam.arousal > 9)
      r.violations.push_back({"interruptions[" + idx + "].arousal", "in 1..9",
                              std::to_string(sam.arousal)});
    if (sam.progress < 1 || sam.progress > 5)
      r.violations.push_back({"interruptions[" + idx + "].progress", "in 1..5",
                              std::to_string(sam.progress)});
    for (const auto& [k, t] : s.traces) {
      if (t.samples.empty()) continue;
      if (!t.covers(sam.t_ms - 10000, sam.t_ms) || t.has_gap_in(sam.t_ms - 10000, sam.t_ms))
        r.violations.push_back({"interruptions[" + idx + "]",
                                "insufficient pre-interruption data (10 s of " +
                                    std::string(kind_name(k)) + ")",
                                std::to_string(sam.t_ms)});
    }
  }

  if (s.elicitation_ratings.size() != 16)
    r.violations.push_back({"elicitation_ratings", "exactly 16 pairs",
                            std::to_string(s.elicitation_ratings.size())});
  for (std::size_t i = 0; i < s.elicitation_ratings.size(); ++i) {
    auto [v, a] = s.elicitation_ratings[i];
    if (v < 1 || v > 9 || a < 1 || a > 9)
      r.violations.push_back({"elicitation_ratings[" + std::to_string(i) + "]", "in 1..9",
                              "(" + std::to_string(v) + "," + std::to_string(a) + ")"});
  }
  return r;
}

}  // namespace affectpipe

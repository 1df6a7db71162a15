#include <catch2/catch_amalgamated.hpp>

#include "affectpipe/model.hpp"

using namespace affectpipe;

namespace {

SignalTrace flat_trace(SignalKind kind, double rate, std::int64_t start_ms, double seconds,
                       double value = 1.0) {
  SignalTrace t;
  t.kind = kind;
  t.sample_rate_hz = rate;
  t.start_ms = start_ms;
  t.samples.assign(static_cast<std::size_t>(rate * seconds), value);
  return t;
}

SessionRecord valid_session() {
  SessionRecord s;
  s.subject_id = "s01";
  std::int64_t t0 = 1000000;
  for (SignalKind k : kAllKinds)
    s.traces[k] = flat_trace(k, nominal_rate_hz(k), t0, 400.0);
  s.baseline_interval = {t0 + 5000, t0 + 35000};
  for (int i = 0; i < 6; ++i) {
    SamRating r;
    r.valence = 3 + i % 4;
    r.arousal = 4 + i % 3;
    r.progress = 1 + i % 5;
    r.t_ms = t0 + 60000 + i * 50000;
    s.interruptions.push_back(r);
  }
  for (int i = 0; i < 16; ++i) s.elicitation_ratings.emplace_back(4 + i % 3, 5 - i % 2);
  return s;
}

}  // namespace

TEST_CASE("valid session yields an empty report") {
  auto report = validate_session(valid_session());
  CAPTURE(report.violations.size());
  for (const auto& v : report.violations) {
    CAPTURE(v.field, v.rule, v.value);
  }
  REQUIRE(report.empty());
  REQUIRE(report.ok());
}

TEST_CASE("missing EDA trace is reported against the full sensor set") {
  SessionRecord s = valid_session();
  s.traces.erase(SignalKind::Eda);
  auto report = validate_session(s, SensorConfig::FullSet);
  REQUIRE_FALSE(report.ok());
  bool found = false;
  for (const auto& v : report.violations)
    if (v.rule.find("missing kind eda") != std::string::npos) found = true;
  REQUIRE(found);
  // but a brainlink-only consumer does not need it
  REQUIRE(validate_session(s, SensorConfig::BrainlinkOnly).ok());
}

TEST_CASE("interruption too close to trace start is reported") {
  SessionRecord s = valid_session();
  s.baseline_interval = {s.interruptions.front().t_ms - 36000,
                         s.interruptions.front().t_ms - 6000};
  for (auto& [k, t] : s.traces) t.start_ms = s.interruptions.front().t_ms - 7000;
  auto report = validate_session(s);
  REQUIRE_FALSE(report.ok());
  bool found = false;
  for (const auto& v : report.violations)
    if (v.rule.find("insufficient pre-interruption data") != std::string::npos) found = true;
  REQUIRE(found);
}

TEST_CASE("rating range violations name the offending field and value") {
  SessionRecord s = valid_session();
  s.interruptions[2].valence = 10;
  s.interruptions[4].progress = 0;
  auto report = validate_session(s);
  REQUIRE_FALSE(report.ok());
  bool v10 = false, p0 = false;
  for (const auto& v : report.violations) {
    if (v.field == "interruptions[2].valence" && v.value == "10") v10 = true;
    if (v.field == "interruptions[4].progress" && v.value == "0") p0 = true;
  }
  REQUIRE(v10);
  REQUIRE(p0);
}

TEST_CASE("non-six interruption count warns but stays usable") {
  SessionRecord s = valid_session();
  s.interruptions.pop_back();
  auto report = validate_session(s);
  REQUIRE_FALSE(report.empty());
  REQUIRE(report.ok());  // warning only
}

TEST_CASE("boundary ratings 1 and 9 are valid, unsorted interruptions are not") {
  SessionRecord s = valid_session();
  s.interruptions[0].valence = 1;
  s.interruptions[1].valence = 9;
  REQUIRE(validate_session(s).ok());
  std::swap(s.interruptions[0].t_ms, s.interruptions[5].t_ms);
  REQUIRE_FALSE(validate_session(s).ok());
}

TEST_CASE("validation is pure and deterministic") {
  SessionRecord s = valid_session();
  s.interruptions[2].valence = 12;
  s.elicitation_ratings[3] = {0, 5};
  auto a = validate_session(s);
  auto b = validate_session(s);
  REQUIRE(a.violations.size() == b.violations.size());
  for (std::size_t i = 0; i < a.violations.size(); ++i) {
    REQUIRE(a.violations[i].field == b.violations[i].field);
    REQUIRE(a.violations[i].rule == b.violations[i].rule);
    REQUIRE(a.violations[i].value == b.violations[i].value);
  }
}

TEST_CASE("baseline must be 30 s and precede the first interruption") {
  SessionRecord s = valid_session();
  s.baseline_interval.t1_ms = s.baseline_interval.t0_ms + 20000;
  REQUIRE_FALSE(validate_session(s).ok());

  s = valid_session();
  s.baseline_interval = {s.interruptions.front().t_ms + 1000,
                         s.interruptions.front().t_ms + 31000};
  REQUIRE_FALSE(validate_session(s).ok());
}

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "affectpipe/dataset.hpp"
#include "affectpipe/errors.hpp"
#include "affectpipe/features.hpp"
#include "affectpipe/labeling.hpp"
#include "affectpipe/model.hpp"
#include "affectpipe/util.hpp"

namespace affectpipe {

namespace fs = std::filesystem;

// provenance key/value pairs carried at the top of every emitted artifact
using Provenance = std::vector<std::pair<std::string, std::string>>;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::MissingFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::MissingFile, "cannot write " + path.string());
  out << content;
}

inline std::string digest_file(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

namespace ingestdetail {

// lines of a text file, LF or CRLF, without the terminator
inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline double parse_double(const std::string& s, const fs::path& file, std::size_t row) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(Errc::ParseError, file.string() + " row " + std::to_string(row) +
                               ": not a number: '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const fs::path& file, std::size_t row) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(Errc::ParseError, file.string() + " row " + std::to_string(row) +
                               ": not an integer: '" + s + "'");
  return v;
}

}  // namespace ingestdetail

// ---------------------------------------------------------------------------
// Trace CSV: header `timestamp_ms,value`, one sample per row. Leading '#'
// lines are provenance comments. Samples are snapped onto the declared-rate
// grid; holes are held at the previous value and holes wider than two sample
// periods become gap annotations.
inline SignalTrace load_trace_csv(const fs::path& path, SignalKind kind,
                                  double declared_rate_hz) {
  using namespace ingestdetail;
  auto lines = split_lines(read_file(path));
  std::vector<std::pair<double, double>> rows;  // (timestamp_ms, value)
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "timestamp_ms,value")
        fail(Errc::ParseError,
             path.string() + " row " + std::to_string(i + 1) +
                 ": expected header 'timestamp_ms,value', got '" + line + "'");
      header_seen = true;
      continue;
    }
    auto cells = split_csv_row(line);
    if (cells.size() != 2)
      fail(Errc::ParseError,
           path.string() + " row " + std::to_string(i + 1) + ": expected 2 columns");
    rows.emplace_back(parse_double(cells[0], path, i + 1),
                      parse_double(cells[1], path, i + 1));
  }
  if (rows.empty()) fail(Errc::ParseError, path.string() + ": no samples");

  if (rows.size() >= 2) {
    // median spacing is robust to recording holes
    std::vector<double> diffs;
    diffs.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i)
      diffs.push_back(rows[i].first - rows[i - 1].first);
    std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
    double median_ms = diffs[diffs.size() / 2];
    if (median_ms <= 0.0)
      fail(Errc::ParseError, path.string() + ": timestamps not increasing");
    double inferred_hz = 1000.0 / median_ms;
    if (std::abs(inferred_hz - declared_rate_hz) / declared_rate_hz > 0.01)
      fail(Errc::RateMismatch,
           path.string() + ": declared " + format_g9(declared_rate_hz) +
               " Hz but timestamp spacing implies " + format_g9(inferred_hz) + " Hz");
  }

  SignalTrace t;
  t.kind = kind;
  t.sample_rate_hz = declared_rate_hz;
  t.start_ms = static_cast<std::int64_t>(std::llround(rows.front().first));
  double period = 1000.0 / declared_rate_hz;

  t.samples.push_back(rows.front().second);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double spacing = rows[i].first - rows[i - 1].first;
    if (spacing < 0.5 * period)
      fail(Errc::ParseError, path.string() + " row " + std::to_string(i + 1) +
                                 ": duplicate or non-increasing timestamp");
    auto advance = static_cast<std::size_t>(std::llround(spacing / period));
    if (advance > 1) {
      double held = t.samples.back();
      for (std::size_t k = 1; k < advance; ++k) t.samples.push_back(held);
      if (spacing > 2.0 * period)
        t.gaps.push_back({static_cast<std::int64_t>(std::llround(rows[i - 1].first)),
                          static_cast<std::int64_t>(std::llround(rows[i].first))});
    }
    t.samples.push_back(rows[i].second);
  }
  return t;
}

inline void store_trace_csv(const fs::path& path, const SignalTrace& t,
                            const Provenance& prov = {}) {
  std::ostringstream out;
  for (const auto& [k, v] : prov) out << "# " << k << ": " << v << "\n";
  out << "timestamp_ms,value\n";
  char buf[64];
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    double tm = t.time_of_ms(i);
    bool in_gap = false;
    for (const auto& g : t.gaps)
      if (tm > g.t0_ms + 1e-6 && tm < g.t1_ms - 1e-6) in_gap = true;
    if (in_gap) continue;  // held filler samples are not real data
    std::snprintf(buf, sizeof(buf), "%.3f,%.9g\n", tm, t.samples[i]);
    out << buf;
  }
  write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Session manifest (single JSON document)

struct SessionManifest {
  std::string subject_id;
  std::map<SignalKind, std::pair<std::string, double>> traces;  // path, rate_hz
  TimeInterval baseline;
  std::vector<SamRating> interruptions;
  std::vector<std::pair<int, int>> elicitation;
  std::string overrides_path;  // optional
  fs::path dir;                // directory of the manifest, for relative paths
};

inline SessionManifest parse_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, path.string() + ": " + e.what());
  }
  SessionManifest m;
  m.dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  try {
    if (!j.contains("subject_id")) fail(Errc::ParseError, path.string() + ": missing subject_id");
    m.subject_id = j.at("subject_id").get<std::string>();
    if (!j.contains("traces")) fail(Errc::ParseError, path.string() + ": missing traces");
    for (const auto& [name, spec] : j.at("traces").items()) {
      auto kind = kind_from_name(name);
      if (!kind)
        fail(Errc::ParseError, path.string() + ": unknown trace kind '" + name + "'");
      m.traces[*kind] = {spec.at("path").get<std::string>(), spec.at("rate_hz").get<double>()};
    }
    if (!j.contains("baseline_ms") || j.at("baseline_ms").size() != 2)
      fail(Errc::ParseError, path.string() + ": missing or malformed baseline_ms");
    m.baseline = {j.at("baseline_ms")[0].get<std::int64_t>(),
                  j.at("baseline_ms")[1].get<std::int64_t>()};
    if (!j.contains("interruptions"))
      fail(Errc::ParseError, path.string() + ": missing interruptions");
    for (const auto& it : j.at("interruptions")) {
      SamRating s;
      s.t_ms = it.at("t_ms").get<std::int64_t>();
      s.valence = it.at("valence").get<int>();
      s.arousal = it.at("arousal").get<int>();
      s.progress = it.at("progress").get<int>();
      m.interruptions.push_back(s);
    }
    if (!j.contains("elicitation"))
      fail(Errc::ParseError, path.string() + ": missing elicitation block (16 rating pairs)");
    for (const auto& pair : j.at("elicitation"))
      m.elicitation.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    if (j.contains("overrides")) m.overrides_path = j.at("overrides").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, path.string() + ": " + e.what());
  }
  return m;
}

inline SessionRecord load_session(const fs::path& manifest_path) {
  SessionManifest m = parse_manifest(manifest_path);
  SessionRecord s;
  s.subject_id = m.subject_id;
  s.baseline_interval = m.baseline;
  s.interruptions = m.interruptions;
  s.elicitation_ratings = m.elicitation;
  for (const auto& [kind, ref] : m.traces)
    s.traces[kind] = load_trace_csv(m.dir / ref.first, kind, ref.second);
  return s;
}

// Writes manifest + per-channel trace CSVs under dir; returns manifest path.
inline fs::path store_session(const SessionRecord& s, const fs::path& dir,
                              const Provenance& prov = {}) {
  nlohmann::json traces = nlohmann::json::object();
  for (const auto& [kind, t] : s.traces) {
    std::string rel = std::string("../traces/") + s.subject_id + "_" + kind_name(kind) + ".csv";
    store_trace_csv(dir / "traces" / (s.subject_id + "_" + kind_name(kind) + ".csv"), t, prov);
    traces[kind_name(kind)] = {{"path", rel}, {"rate_hz", t.sample_rate_hz}};
  }
  nlohmann::json j;
  j["subject_id"] = s.subject_id;
  j["traces"] = traces;
  j["baseline_ms"] = {s.baseline_interval.t0_ms, s.baseline_interval.t1_ms};
  nlohmann::json ints = nlohmann::json::array();
  for (const auto& i : s.interruptions)
    ints.push_back({{"t_ms", i.t_ms},
                    {"valence", i.valence},
                    {"arousal", i.arousal},
                    {"progress", i.progress}});
  j["interruptions"] = ints;
  nlohmann::json elic = nlohmann::json::array();
  for (auto [v, a] : s.elicitation_ratings) elic.push_back({v, a});
  j["elicitation"] = elic;
  if (!prov.empty()) {
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [k, v] : prov) p[k] = v;
    j["provenance"] = p;
  }
  fs::path mpath = dir / "manifests" / (s.subject_id + ".json");
  write_file(mpath, j.dump(2) + "\n");
  return mpath;
}

// Study index: a JSON document listing per-subject manifests.
inline fs::path write_study(const std::vector<SessionRecord>& sessions, const fs::path& dir,
                            const Provenance& prov = {}) {
  nlohmann::json j;
  nlohmann::json manifests = nlohmann::json::array();
  for (const auto& s : sessions) {
    fs::path mp = store_session(s, dir, prov);
    manifests.push_back(fs::relative(mp, dir).generic_string());
  }
  j["manifests"] = manifests;
  if (!prov.empty()) {
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [k, v] : prov) p[k] = v;
    j["provenance"] = p;
  }
  fs::path spath = dir / "study.json";
  write_file(spath, j.dump(2) + "\n");
  return spath;
}

inline std::vector<SessionRecord> load_study(const fs::path& study_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(study_json));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, study_json.string() + ": " + e.what());
  }
  if (!j.contains("manifests"))
    fail(Errc::ParseError, study_json.string() + ": missing manifests list");
  std::vector<SessionRecord> sessions;
  fs::path dir = study_json.has_parent_path() ? study_json.parent_path() : fs::path(".");
  for (const auto& rel : j.at("manifests"))
    sessions.push_back(load_session(dir / rel.get<std::string>()));
  std::sort(sessions.begin(), sessions.end(),
            [](const SessionRecord& a, const SessionRecord& b) {
              return a.subject_id < b.subject_id;
            });
  return sessions;
}

// ---------------------------------------------------------------------------
// Dataset CSV: subject_id, obs_idx, <canonical features...>, valence_label,
// arousal_label. Values are printed with 9 significant digits; loading the
// file back reproduces each printed value exactly.

inline void store_dataset(const LabeledDataset& d, const fs::path& path,
                          const Provenance& prov = {}) {
  std::ostringstream out;
  for (const auto& [k, v] : prov) out << "# " << k << ": " << v << "\n";
  out << "subject_id,obs_idx";
  for (const auto& n : d.feature_names) out << "," << n;
  out << ",valence_label,arousal_label\n";
  for (const auto& r : d.rows) {
    out << r.subject_id << "," << r.obs_idx;
    for (double v : r.features) out << "," << format_g9(v);
    out << "," << label_name(r.valence) << "," << label_name(r.arousal) << "\n";
  }
  write_file(path, out.str());
}

inline LabeledDataset load_dataset(const fs::path& path) {
  using namespace ingestdetail;
  auto lines = split_lines(read_file(path));
  LabeledDataset d;
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_row(line);
    if (!header_seen) {
      if (cells.size() < 4 || cells[0] != "subject_id" || cells[1] != "obs_idx" ||
          cells[cells.size() - 2] != "valence_label" || cells.back() != "arousal_label")
        fail(Errc::ParseError, path.string() + ": malformed dataset header");
      d.feature_names.assign(cells.begin() + 2, cells.end() - 2);
      bool canonical = false;
      for (SensorConfig c : {SensorConfig::FullSet, SensorConfig::EmpaticaOnly,
                             SensorConfig::BrainlinkOnly})
        if (d.feature_names == feature_names(c)) canonical = true;
      if (!canonical)
        fail(Errc::SchemaMismatch,
             path.string() + ": feature columns differ from the canonical order");
      header_seen = true;
      continue;
    }
    if (cells.size() != d.feature_names.size() + 4)
      fail(Errc::ParseError, path.string() + " row " + std::to_string(i + 1) +
                                 ": wrong column count");
    DatasetRow r;
    r.subject_id = cells[0];
    r.obs_idx = static_cast<int>(parse_int(cells[1], path, i + 1));
    for (std::size_t c = 0; c < d.feature_names.size(); ++c)
      r.features.push_back(parse_double(cells[2 + c], path, i + 1));
    auto v = valence_from_name(cells[cells.size() - 2]);
    auto a = arousal_from_name(cells.back());
    if (!v || !a)
      fail(Errc::ParseError, path.string() + " row " + std::to_string(i + 1) +
                                 ": unknown label");
    r.valence = *v;
    r.arousal = *a;
    d.rows.push_back(std::move(r));
  }
  if (!header_seen) fail(Errc::ParseError, path.string() + ": missing header");
  return d;
}

// ---------------------------------------------------------------------------
// Manual label overrides CSV: subject_id, obs_idx, valence_label, arousal_label

inline OverrideMap load_overrides(const fs::path& path) {
  using namespace ingestdetail;
  auto lines = split_lines(read_file(path));
  OverrideMap m;
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "subject_id,obs_idx,valence_label,arousal_label")
        fail(Errc::ParseError, path.string() + ": malformed overrides header");
      header_seen = true;
      continue;
    }
    auto cells = split_csv_row(line);
    if (cells.size() != 4)
      fail(Errc::ParseError, path.string() + " row " + std::to_string(i + 1) +
                                 ": expected 4 columns");
    auto v = valence_from_name(cells[2]);
    auto a = arousal_from_name(cells[3]);
    if (!v || !a)
      fail(Errc::ParseError, path.string() + " row " + std::to_string(i + 1) +
                                 ": unknown label");
    m[{cells[0], static_cast<int>(parse_int(cells[1], path, i + 1))}] = {*v, *a};
  }
  return m;
}

}  // namespace affectpipe

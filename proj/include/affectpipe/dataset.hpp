#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "affectpipe/errors.hpp"
#include "affectpipe/model.hpp"

namespace affectpipe {

enum class ValenceLabel { Negative, Positive };
enum class ArousalLabel { Low, High };
enum class Target { Valence, Arousal };

inline const char* label_name(ValenceLabel v) {
  return v == ValenceLabel::Positive ? "Positive" : "Negative";
}
inline const char* label_name(ArousalLabel a) {
  return a == ArousalLabel::High ? "High" : "Low";
}
inline const char* target_name(Target t) { return t == Target::Valence ? "valence" : "arousal"; }

inline std::optional<ValenceLabel> valence_from_name(const std::string& s) {
  if (s == "Positive") return ValenceLabel::Positive;
  if (s == "Negative") return ValenceLabel::Negative;
  return std::nullopt;
}
inline std::optional<ArousalLabel> arousal_from_name(const std::string& s) {
  if (s == "High") return ArousalLabel::High;
  if (s == "Low") return ArousalLabel::Low;
  return std::nullopt;
}
inline std::optional<Target> target_from_name(const std::string& s) {
  if (s == "valence") return Target::Valence;
  if (s == "arousal") return Target::Arousal;
  return std::nullopt;
}

struct DatasetRow {
  std::string subject_id;
  int obs_idx = 0;
  std::vector<double> features;  // canonical order, matches feature_names
  ValenceLabel valence = ValenceLabel::Negative;
  ArousalLabel arousal = ArousalLabel::Low;

  // binary class for a target: 1 = Positive / High
  int y(Target t) const {
    return t == Target::Valence ? (valence == ValenceLabel::Positive ? 1 : 0)
                                : (arousal == ArousalLabel::High ? 1 : 0);
  }
};

inline std::string class_name(Target t, int y) {
  if (t == Target::Valence) return y ? "Positive" : "Negative";
  return y ? "High" : "Low";
}

struct LabeledDataset {
  std::vector<std::string> feature_names;
  std::vector<DatasetRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  // counts[0] = negative/low class, counts[1] = positive/high class
  std::array<std::size_t, 2> class_counts(Target t) const {
    std::array<std::size_t, 2> c{0, 0};
    for (const auto& r : rows) ++c[static_cast<std::size_t>(r.y(t))];
    return c;
  }

  void sort_canonical() {
    std::sort(rows.begin(), rows.end(), [](const DatasetRow& a, const DatasetRow& b) {
      if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
      return a.obs_idx < b.obs_idx;
    });
  }

  // restriction to a feature-name subset, preserving the given order
  LabeledDataset project(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    for (const auto& n : names) {
      auto it = std::find(feature_names.begin(), feature_names.end(), n);
      if (it == feature_names.end())
        fail(Errc::SchemaMismatch, "feature '" + n + "' not present in dataset");
      idx.push_back(static_cast<std::size_t>(it - feature_names.begin()));
    }
    LabeledDataset out;
    out.feature_names = names;
    out.rows.reserve(rows.size());
    for (const auto& r : rows) {
      DatasetRow nr = r;
      nr.features.clear();
      for (std::size_t i : idx) nr.features.push_back(r.features[i]);
      out.rows.push_back(std::move(nr));
    }
    return out;
  }
};

}  // namespace affectpipe

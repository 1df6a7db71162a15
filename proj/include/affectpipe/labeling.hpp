#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "affectpipe/dataset.hpp"
#include "affectpipe/errors.hpp"
#include "affectpipe/features.hpp"
#include "affectpipe/model.hpp"

namespace affectpipe {

// Per-subject reference point for SAM score discretization: mean of the 16
// ratings given during video-driven emotion elicitation.
struct ElicitationProfile {
  std::string subject_id;
  double mean_valence = 0.0;
  double mean_arousal = 0.0;
};

enum class LabelResolution { Automatic, ManualOverride };

struct GoldLabel {
  ValenceLabel valence = ValenceLabel::Negative;
  ArousalLabel arousal = ArousalLabel::Low;
  bool ambiguous_valence = false;
  bool ambiguous_arousal = false;
  LabelResolution resolution = LabelResolution::Automatic;
};

inline ElicitationProfile elicitation_means(const std::string& subject_id,
                                            const std::vector<std::pair<int, int>>& ratings) {
  if (ratings.size() != 16)
    fail(Errc::WrongCount, "expected 16 elicitation rating pairs, got " +
                               std::to_string(ratings.size()));
  ElicitationProfile p;
  p.subject_id = subject_id;
  for (auto [v, a] : ratings) {
    if (v < 1 || v > 9 || a < 1 || a > 9)
      fail(Errc::OutOfRange, "elicitation rating outside 1..9");
    p.mean_valence += v;
    p.mean_arousal += a;
  }
  p.mean_valence /= 16.0;
  p.mean_arousal /= 16.0;
  return p;
}

struct Discretized {
  bool positive = false;   // Positive valence / High arousal side
  bool ambiguous = false;  // score within mean +/- 0.5
};

// Scores above the mean map to the Positive/High side, below to
// Negative/Low. Equality defaults to Negative/Low and is always flagged
// ambiguous, as is anything inside the +/-0.5 band.
inline Discretized discretize(int score, double mean) {
  Discretized d;
  d.positive = score > mean;
  d.ambiguous = std::abs(score - mean) <= 0.5;
  return d;
}

struct OverrideLabels {
  ValenceLabel valence = ValenceLabel::Negative;
  ArousalLabel arousal = ArousalLabel::Low;
};

using OverrideMap = std::map<std::pair<std::string, int>, OverrideLabels>;

struct GoldSummary {
  std::size_t observations = 0;
  std::size_t positive_valence = 0;
  std::size_t negative_valence = 0;
  std::size_t high_arousal = 0;
  std::size_t low_arousal = 0;
  std::size_t ambiguous_valence = 0;
  std::size_t ambiguous_arousal = 0;
  std::size_t overridden = 0;
  std::vector<std::pair<std::string, int>> unresolved;  // ambiguous and not overridden
};

struct BuildGoldResult {
  LabeledDataset dataset;
  GoldSummary summary;
  std::vector<GoldLabel> labels;  // aligned with dataset.rows
};

inline GoldLabel label_observation(const SamRating& sam, const ElicitationProfile& prof,
                                   const OverrideLabels* override_labels) {
  GoldLabel g;
  Discretized v = discretize(sam.valence, prof.mean_valence);
  Discretized a = discretize(sam.arousal, prof.mean_arousal);
  g.valence = v.positive ? ValenceLabel::Positive : ValenceLabel::Negative;
  g.arousal = a.positive ? ArousalLabel::High : ArousalLabel::Low;
  g.ambiguous_valence = v.ambiguous;
  g.ambiguous_arousal = a.ambiguous;
  if (override_labels) {
    g.valence = override_labels->valence;
    g.arousal = override_labels->arousal;
    g.resolution = LabelResolution::ManualOverride;
  }
  return g;
}

// Assembles the gold-labeled dataset: one observation per interruption,
// discretized against the subject's elicitation means, with manual overrides
// applied to (and required for, in strict mode) ambiguous instances.
inline BuildGoldResult build_gold(const std::vector<SessionRecord>& sessions,
                                  const std::map<std::string, ElicitationProfile>& profiles,
                                  const std::vector<FeatureVector>& features,
                                  const OverrideMap& overrides = {},
                                  bool strict = false) {
  std::map<std::pair<std::string, int>, const FeatureVector*> by_obs;
  for (const auto& f : features) by_obs[{f.subject_id, f.obs_idx}] = &f;

  BuildGoldResult out;
  for (const auto& s : sessions) {
    auto pit = profiles.find(s.subject_id);
    if (pit == profiles.end())
      fail(Errc::MissingProfile, "no elicitation profile for subject " + s.subject_id);
    for (std::size_t i = 0; i < s.interruptions.size(); ++i) {
      int obs_idx = static_cast<int>(i);
      auto key = std::make_pair(s.subject_id, obs_idx);
      auto oit = overrides.find(key);
      GoldLabel g = label_observation(s.interruptions[i], pit->second,
                                      oit == overrides.end() ? nullptr : &oit->second);

      auto fit = by_obs.find(key);
      if (fit == by_obs.end())
        fail(Errc::SchemaMismatch, "no feature vector for " + s.subject_id + " obs " +
                                       std::to_string(obs_idx));
      const FeatureVector& fv = *fit->second;
      if (out.dataset.feature_names.empty())
        out.dataset.feature_names = fv.names;
      else if (out.dataset.feature_names != fv.names)
        fail(Errc::SchemaMismatch, "inconsistent feature ordering across observations");

      DatasetRow row;
      row.subject_id = s.subject_id;
      row.obs_idx = obs_idx;
      row.features = fv.values;
      row.valence = g.valence;
      row.arousal = g.arousal;
      out.dataset.rows.push_back(std::move(row));
      out.labels.push_back(g);

      auto& sm = out.summary;
      ++sm.observations;
      (g.valence == ValenceLabel::Positive ? sm.positive_valence : sm.negative_valence)++;
      (g.arousal == ArousalLabel::High ? sm.high_arousal : sm.low_arousal)++;
      if (g.ambiguous_valence) ++sm.ambiguous_valence;
      if (g.ambiguous_arousal) ++sm.ambiguous_arousal;
      if (g.resolution == LabelResolution::ManualOverride) ++sm.overridden;
      if ((g.ambiguous_valence || g.ambiguous_arousal) &&
          g.resolution != LabelResolution::ManualOverride)
        sm.unresolved.push_back(key);
    }
  }
  if (strict && !out.summary.unresolved.empty()) {
    auto [sid, idx] = out.summary.unresolved.front();
    fail(Errc::UnresolvedAmbiguity,
         std::to_string(out.summary.unresolved.size()) +
             " ambiguous instance(s) lack overrides, first: " + sid + " obs " +
             std::to_string(idx));
  }
  return out;
}

}  // namespace affectpipe

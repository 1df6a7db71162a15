#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "affectpipe/classifiers.hpp"
#include "affectpipe/dataset.hpp"
#include "affectpipe/errors.hpp"
#include "affectpipe/util.hpp"

namespace affectpipe {

struct Metrics {
  double precision = 0.0;  // macro over the two classes
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

// Macro-averaged precision/recall/F1 (0/0 counted as 0) plus accuracy.
inline Metrics compute_metrics(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    fail(Errc::LengthMismatch, "prediction and truth lengths differ or are zero");
  std::array<std::array<std::size_t, 2>, 2> cm{};  // [truth][pred]
  for (std::size_t i = 0; i < pred.size(); ++i)
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  Metrics m;
  for (int c = 0; c < 2; ++c) {
    double tp = double(cm[c][c]);
    double fp = double(cm[1 - c][c]);
    double fn = double(cm[c][1 - c]);
    double prec = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    double rec = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    m.precision += prec / 2.0;
    m.recall += rec / 2.0;
    m.f1 += f1 / 2.0;
  }
  m.accuracy = double(cm[0][0] + cm[1][1]) / double(pred.size());
  return m;
}

// Constant majority-class predictor evaluated on the dataset itself.
inline Metrics majority_baseline(const LabeledDataset& d, Target target) {
  if (d.empty()) fail(Errc::EmptyDataset, "majority_baseline on empty dataset");
  auto counts = d.class_counts(target);
  int maj = clfdetail::tie_class_for(counts, target);
  std::vector<int> pred(d.size(), maj), truth;
  truth.reserve(d.size());
  for (const auto& r : d.rows) truth.push_back(r.y(target));
  return compute_metrics(pred, truth);
}

// Stratified train/test split. Per-class test counts start at
// round(class_count * fraction) and are nudged toward round(n * fraction),
// so class proportions hold within one instance. Deterministic per seed.
inline std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& d,
                                                                  Target target,
                                                                  double test_fraction,
                                                                  std::uint64_t seed) {
  auto counts = d.class_counts(target);
  if (counts[0] < 2 || counts[1] < 2)
    fail(Errc::ClassTooSmall, "stratified_split needs at least 2 rows per class");

  std::array<long, 2> want{};
  std::array<double, 2> exact{};
  for (int c = 0; c < 2; ++c) {
    exact[c] = double(counts[c]) * test_fraction;
    want[c] = std::lround(exact[c]);
    want[c] = std::min<long>(want[c], long(counts[c]) - 1);
  }
  long total = std::lround(double(d.size()) * test_fraction);
  total = std::min<long>(total, long(d.size()) - 2);
  while (want[0] + want[1] > total) {
    int c = (want[0] - exact[0] > want[1] - exact[1] ||
             (want[0] - exact[0] == want[1] - exact[1] && counts[0] >= counts[1]))
                ? 0
                : 1;
    if (want[c] == 0) c = 1 - c;
    --want[c];
  }
  while (want[0] + want[1] < total) {
    int c = (exact[0] - want[0] > exact[1] - want[1] ||
             (exact[0] - want[0] == exact[1] - want[1] && counts[0] >= counts[1]))
                ? 0
                : 1;
    if (want[c] >= long(counts[c]) - 1) c = 1 - c;
    ++want[c];
  }

  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < d.size(); ++i)
    members[static_cast<std::size_t>(d.rows[i].y(target))].push_back(i);
  std::set<std::size_t> test_idx;
  for (int c = 0; c < 2; ++c) {
    std::mt19937_64 rng(derive_seed(seed, 0x517a + c));
    auto& v = members[c];
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng() % i]);
    for (long k = 0; k < want[c]; ++k) test_idx.insert(v[static_cast<std::size_t>(k)]);
  }

  LabeledDataset train, test;
  train.feature_names = d.feature_names;
  test.feature_names = d.feature_names;
  for (std::size_t i = 0; i < d.size(); ++i)
    (test_idx.count(i) ? test : train).rows.push_back(d.rows[i]);
  return {std::move(train), std::move(test)};
}

struct LooCvResult {
  HyperParams hp;
  double mean_accuracy = 0.0;
  std::size_t skipped_folds = 0;
};

// Hyperparameter selection by leave-one-out cross validation on the training
// set; degenerate single-class folds are skipped. Ties go to grid order.
inline LooCvResult loo_cv_select(AlgorithmId alg, const std::vector<HyperParams>& grid,
                                 const LabeledDataset& train_set, Target target,
                                 std::uint64_t seed) {
  if (grid.empty()) fail(Errc::EmptyDataset, "empty hyperparameter grid");
  LooCvResult best;
  bool have_best = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::size_t correct = 0, graded = 0, skipped = 0;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      LabeledDataset fold;
      fold.feature_names = train_set.feature_names;
      for (std::size_t j = 0; j < train_set.size(); ++j)
        if (j != i) fold.rows.push_back(train_set.rows[j]);
      auto counts = fold.class_counts(target);
      if (counts[0] == 0 || counts[1] == 0) {
        ++skipped;
        continue;
      }
      TrainedModel m = train(alg, grid[g], fold, target,
                             derive_seed(seed, g * 1000003 + i));
      if (predict_row(m, train_set.rows[i].features) == train_set.rows[i].y(target))
        ++correct;
      ++graded;
    }
    double acc = graded > 0 ? double(correct) / double(graded) : 0.0;
    if (!have_best || acc > best.mean_accuracy + 1e-15) {
      best = {grid[g], acc, skipped};
      have_best = true;
    }
  }
  return best;
}

struct RunResult {
  std::string fold_id;  // "run3" or subject id
  Metrics metrics;
  HyperParams chosen_hp;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

enum class EvalSetting { HoldOut, Loso };

struct EvalReport {
  EvalSetting setting = EvalSetting::HoldOut;
  Target target = Target::Valence;
  SensorConfig config = SensorConfig::FullSet;
  AlgorithmId algorithm = AlgorithmId::nb;
  std::uint64_t seed = 0;
  std::vector<RunResult> runs;
  std::vector<std::string> skipped_folds;
  Metrics mean;
  double accuracy_stdev = 0.0;
  Metrics baseline;  // majority baseline on the full dataset
};

namespace evaldetail {

inline void finalize(EvalReport& r) {
  if (r.runs.empty()) return;
  for (const auto& run : r.runs) {
    r.mean.precision += run.metrics.precision;
    r.mean.recall += run.metrics.recall;
    r.mean.f1 += run.metrics.f1;
    r.mean.accuracy += run.metrics.accuracy;
  }
  auto n = double(r.runs.size());
  r.mean.precision /= n;
  r.mean.recall /= n;
  r.mean.f1 /= n;
  r.mean.accuracy /= n;
  if (r.runs.size() > 1) {
    double ss = 0.0;
    for (const auto& run : r.runs) {
      double dlt = run.metrics.accuracy - r.mean.accuracy;
      ss += dlt * dlt;
    }
    r.accuracy_stdev = std::sqrt(ss / (n - 1.0));
  }
}

inline std::vector<int> truths(const LabeledDataset& d, Target t) {
  std::vector<int> y;
  y.reserve(d.size());
  for (const auto& r : d.rows) y.push_back(r.y(t));
  return y;
}

inline std::vector<int> predictions(const TrainedModel& m, const LabeledDataset& d) {
  std::vector<int> p;
  p.reserve(d.size());
  for (const auto& r : d.rows) p.push_back(predict_row(m, r.features));
  return p;
}

}  // namespace evaldetail

// Repeated stratified hold-out: per run, split with seed+run, select
// hyperparameters by LOO-CV on the training portion, fit, score the test set.
inline EvalReport holdout_eval(const LabeledDataset& d, AlgorithmId alg,
                               const std::vector<HyperParams>& grid, Target target,
                               int runs = 10, std::uint64_t seed = 0,
                               double test_fraction = 0.1, int threads = max_threads()) {
  EvalReport report;
  report.setting = EvalSetting::HoldOut;
  report.target = target;
  report.algorithm = alg;
  report.seed = seed;
  report.baseline = majority_baseline(d, target);
  report.runs.resize(static_cast<std::size_t>(runs));

  parallel_for(
      static_cast<std::size_t>(runs),
      [&](std::size_t r) {
        std::uint64_t run_seed = seed + r;
        auto [train_set, test_set] = stratified_split(d, target, test_fraction, run_seed);
        LooCvResult sel = loo_cv_select(alg, grid, train_set, target, run_seed);
        TrainedModel model = train(alg, sel.hp, train_set, target, run_seed);
        RunResult rr;
        rr.fold_id = "run" + std::to_string(r);
        rr.chosen_hp = sel.hp;
        rr.train_size = train_set.size();
        rr.test_size = test_set.size();
        rr.metrics = compute_metrics(evaldetail::predictions(model, test_set),
                                     evaldetail::truths(test_set, target));
        report.runs[r] = std::move(rr);
      },
      threads);
  evaldetail::finalize(report);
  return report;
}

// Leave-one-subject-out: one fold per subject, trained on all other
// subjects' observations (with LOO-CV hyperparameter selection inside).
// Folds whose training set degenerates to a single class are skipped and
// reported.
inline EvalReport loso_eval(const LabeledDataset& d, AlgorithmId alg,
                            const std::vector<HyperParams>& grid, Target target,
                            std::uint64_t seed = 0, int threads = max_threads()) {
  std::vector<std::string> subjects;
  for (const auto& r : d.rows)
    if (subjects.empty() || std::find(subjects.begin(), subjects.end(), r.subject_id) ==
                                subjects.end())
      subjects.push_back(r.subject_id);
  std::sort(subjects.begin(), subjects.end());
  if (subjects.size() < 2)
    fail(Errc::ClassTooSmall, "loso_eval needs at least 2 subjects");

  EvalReport report;
  report.setting = EvalSetting::Loso;
  report.target = target;
  report.algorithm = alg;
  report.seed = seed;
  report.baseline = majority_baseline(d, target);

  std::vector<std::optional<RunResult>> fold_results(subjects.size());
  std::vector<std::string> fold_skips(subjects.size());
  parallel_for(
      subjects.size(),
      [&](std::size_t f) {
        const std::string& subject = subjects[f];
        LabeledDataset train_set, test_set;
        train_set.feature_names = d.feature_names;
        test_set.feature_names = d.feature_names;
        for (const auto& r : d.rows)
          (r.subject_id == subject ? test_set : train_set).rows.push_back(r);
        auto counts = train_set.class_counts(target);
        if (counts[0] == 0 || counts[1] == 0) {
          fold_skips[f] = subject;
          return;
        }
        std::uint64_t fold_seed = derive_seed(seed, 0x105 + f);
        LooCvResult sel = loo_cv_select(alg, grid, train_set, target, fold_seed);
        TrainedModel model = train(alg, sel.hp, train_set, target, fold_seed);
        RunResult rr;
        rr.fold_id = subject;
        rr.chosen_hp = sel.hp;
        rr.train_size = train_set.size();
        rr.test_size = test_set.size();
        rr.metrics = compute_metrics(evaldetail::predictions(model, test_set),
                                     evaldetail::truths(test_set, target));
        fold_results[f] = std::move(rr);
      },
      threads);
  for (std::size_t f = 0; f < subjects.size(); ++f) {
    if (fold_results[f])
      report.runs.push_back(std::move(*fold_results[f]));
    else if (!fold_skips[f].empty())
      report.skipped_folds.push_back(fold_skips[f]);
  }
  evaldetail::finalize(report);
  return report;
}

}  // namespace affectpipe

#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "affectpipe/classifiers.hpp"
#include "affectpipe/errors.hpp"
#include "affectpipe/eval.hpp"
#include "affectpipe/lmm.hpp"

namespace affectpipe {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Metrics / evaluation reports

inline json to_json(const Metrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"accuracy", m.accuracy}};
}

inline Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  return m;
}

inline json to_json(const EvalReport& r) {
  json runs = json::array();
  for (const auto& run : r.runs) {
    json hp = json::object();
    for (const auto& [k, v] : run.chosen_hp) hp[k] = v;
    runs.push_back({{"fold", run.fold_id},
                    {"metrics", to_json(run.metrics)},
                    {"hyperparameters", hp},
                    {"train_size", run.train_size},
                    {"test_size", run.test_size}});
  }
  return {{"setting", r.setting == EvalSetting::HoldOut ? "holdout" : "loso"},
          {"target", target_name(r.target)},
          {"devices", sensor_config_name(r.config)},
          {"algorithm", algorithm_name(r.algorithm)},
          {"seed", r.seed},
          {"runs", runs},
          {"skipped_folds", r.skipped_folds},
          {"mean", to_json(r.mean)},
          {"accuracy_stdev", r.accuracy_stdev},
          {"baseline", to_json(r.baseline)}};
}

inline EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.setting = j.at("setting").get<std::string>() == "loso" ? EvalSetting::Loso
                                                            : EvalSetting::HoldOut;
  r.target = *target_from_name(j.at("target").get<std::string>());
  r.config = *sensor_config_from_name(j.at("devices").get<std::string>());
  r.algorithm = *algorithm_from_name(j.at("algorithm").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& run : j.at("runs")) {
    RunResult rr;
    rr.fold_id = run.at("fold").get<std::string>();
    rr.metrics = metrics_from_json(run.at("metrics"));
    for (const auto& [k, v] : run.at("hyperparameters").items())
      rr.chosen_hp[k] = v.get<double>();
    rr.train_size = run.at("train_size").get<std::size_t>();
    rr.test_size = run.at("test_size").get<std::size_t>();
    r.runs.push_back(std::move(rr));
  }
  for (const auto& s : j.at("skipped_folds")) r.skipped_folds.push_back(s.get<std::string>());
  r.mean = metrics_from_json(j.at("mean"));
  r.accuracy_stdev = j.at("accuracy_stdev").get<double>();
  r.baseline = metrics_from_json(j.at("baseline"));
  return r;
}

// ---------------------------------------------------------------------------
// Mixed-model fits

inline json to_json(const LmmFit& f) {
  json terms = json::array();
  for (Eigen::Index j = 0; j < f.beta.size(); ++j) {
    json t = {{"term", f.term_names[static_cast<std::size_t>(j)]},
              {"estimate", f.beta(j)},
              {"stderr", f.stderrs(j)},
              {"p_upper", f.p_upper[static_cast<std::size_t>(j)]},
              {"p_lower", f.p_lower[static_cast<std::size_t>(j)]}};
    terms.push_back(t);
  }
  json out = {{"method", f.method == LmmMethod::REML ? "REML" : "ML"},
              {"fixed_effects", terms},
              {"sigma2_u", f.sigma2_u},
              {"sigma2_e", f.sigma2_e},
              {"theta", f.theta},
              {"theta_at_bound", f.theta_at_bound},
              {"loglik_reml", f.loglik_reml},
              {"loglik_ml", f.loglik_ml},
              {"dof_upper", f.dof_upper},
              {"dof_lower", f.dof_lower},
              {"lr_test", {{"chi2", f.lr_chi2}, {"dof", f.lr_dof}, {"p", f.lr_p}}}};
  if (!f.deviance_explained_pct.empty()) {
    json de = json::array();
    for (std::size_t i = 0; i < f.deviance_explained_pct.size(); ++i)
      de.push_back({{"term", f.term_names[i + 1]}, {"pct", f.deviance_explained_pct[i]}});
    out["deviance_explained"] = de;
    out["total_deviance_explained_pct"] = f.total_deviance_explained_pct;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trained models (versioned JSON)

namespace serdetail {

inline json std_to_json(const clfdetail::Standardizer& s) {
  return {{"mean", s.mean}, {"scale", s.scale}};
}
inline clfdetail::Standardizer std_from_json(const json& j) {
  clfdetail::Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  return s;
}

inline json tree_to_json(const clfdetail::TreeModel& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes)
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf_class});
  return nodes;
}
inline clfdetail::TreeModel tree_from_json(const json& j) {
  clfdetail::TreeModel t;
  for (const auto& n : j) {
    clfdetail::TreeNode node;
    node.feature = n[0].get<int>();
    node.threshold = n[1].get<double>();
    node.left = n[2].get<int>();
    node.right = n[3].get<int>();
    node.leaf_class = n[4].get<int>();
    t.nodes.push_back(node);
  }
  return t;
}

}  // namespace serdetail

inline json to_json(const TrainedModel& m) {
  using namespace clfdetail;
  json hp = json::object();
  for (const auto& [k, v] : m.hp) hp[k] = v;
  json j = {{"format", "affectpipe-model"},
            {"version", 1},
            {"algorithm", algorithm_name(m.algorithm)},
            {"hyperparameters", hp},
            {"target", target_name(m.target)},
            {"feature_names", m.feature_names},
            {"class_counts", m.class_counts},
            {"tie_class", m.tie_class}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NbModel>) {
          json mean = json::array(), var = json::array();
          for (std::size_t f = 0; f < p.mean.size(); ++f) {
            mean.push_back({p.mean[f][0], p.mean[f][1]});
            var.push_back({p.var[f][0], p.var[f][1]});
          }
          j["params"] = {{"log_prior", p.log_prior}, {"mean", mean}, {"var", var}};
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          j["params"] = {{"k", p.k},
                         {"standardizer", serdetail::std_to_json(p.std)},
                         {"x", p.x},
                         {"y", p.y}};
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          j["params"] = {{"nodes", serdetail::tree_to_json(p)}};
        } else if constexpr (std::is_same_v<T, RfModel>) {
          json trees = json::array();
          for (const auto& t : p.trees) trees.push_back(serdetail::tree_to_json(t));
          j["params"] = {{"trees", trees}};
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          j["params"] = {{"standardizer", serdetail::std_to_json(p.std)},
                         {"w", p.w},
                         {"bias", p.bias}};
        } else {
          j["params"] = {{"standardizer", serdetail::std_to_json(p.std)},
                         {"w1", p.w1},
                         {"w2", p.w2}};
        }
      },
      m.params);
  return j;
}

inline TrainedModel model_from_json(const json& j) {
  using namespace clfdetail;
  if (j.value("format", "") != "affectpipe-model" || j.value("version", 0) != 1)
    fail(Errc::SchemaMismatch, "not a version-1 affectpipe model file");
  TrainedModel m;
  m.algorithm = *algorithm_from_name(j.at("algorithm").get<std::string>());
  for (const auto& [k, v] : j.at("hyperparameters").items()) m.hp[k] = v.get<double>();
  m.target = *target_from_name(j.at("target").get<std::string>());
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  auto cc = j.at("class_counts").get<std::vector<std::size_t>>();
  m.class_counts = {cc[0], cc[1]};
  m.tie_class = j.at("tie_class").get<int>();
  const json& p = j.at("params");
  switch (m.algorithm) {
    case AlgorithmId::nb: {
      NbModel nb;
      auto lp = p.at("log_prior").get<std::vector<double>>();
      nb.log_prior = {lp[0], lp[1]};
      for (const auto& row : p.at("mean")) nb.mean.push_back({row[0], row[1]});
      for (const auto& row : p.at("var")) nb.var.push_back({row[0], row[1]});
      m.params = std::move(nb);
      break;
    }
    case AlgorithmId::knn: {
      KnnModel k;
      k.k = p.at("k").get<int>();
      k.std = serdetail::std_from_json(p.at("standardizer"));
      k.x = p.at("x").get<std::vector<std::vector<double>>>();
      k.y = p.at("y").get<std::vector<int>>();
      m.params = std::move(k);
      break;
    }
    case AlgorithmId::j48:
      m.params = serdetail::tree_from_json(p.at("nodes"));
      break;
    case AlgorithmId::rf: {
      RfModel rf;
      for (const auto& t : p.at("trees")) rf.trees.push_back(serdetail::tree_from_json(t));
      m.params = std::move(rf);
      break;
    }
    case AlgorithmId::svm: {
      SvmModel s;
      s.std = serdetail::std_from_json(p.at("standardizer"));
      s.w = p.at("w").get<std::vector<double>>();
      s.bias = p.at("bias").get<double>();
      m.params = std::move(s);
      break;
    }
    case AlgorithmId::mlp: {
      MlpModel mm;
      mm.std = serdetail::std_from_json(p.at("standardizer"));
      mm.w1 = p.at("w1").get<std::vector<std::vector<double>>>();
      mm.w2 = p.at("w2").get<std::vector<double>>();
      m.params = std::move(mm);
      break;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Text tables

namespace serdetail {
inline std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}
inline std::string pad(std::string s, std::size_t w) {
  while (s.size() < w) s.push_back(' ');
  return s;
}
}  // namespace serdetail

// one summary row per (devices x algorithm) with the shared baseline row
inline std::string render_eval_table(const std::vector<EvalReport>& reports) {
  using serdetail::f2;
  using serdetail::pad;
  std::string out;
  for (EvalSetting setting : {EvalSetting::HoldOut, EvalSetting::Loso}) {
    for (Target target : {Target::Valence, Target::Arousal}) {
      std::vector<const EvalReport*> group;
      for (const auto& r : reports)
        if (r.setting == setting && r.target == target) group.push_back(&r);
      if (group.empty()) continue;
      out += std::string("== ") + target_name(target) + " / " +
             (setting == EvalSetting::HoldOut ? "hold-out" : "leave-one-subject-out") +
             " ==\n";
      out += pad("Devices", 11) + pad("Alg", 6) + pad("Prec", 7) + pad("Rec", 7) +
             pad("F1", 7) + pad("Accuracy", 10) + "stdev\n";
      for (const auto* r : group) {
        out += pad(sensor_config_name(r->config), 11) + pad(algorithm_name(r->algorithm), 6) +
               pad(f2(r->mean.precision), 7) + pad(f2(r->mean.recall), 7) +
               pad(f2(r->mean.f1), 7) + pad(f2(r->mean.accuracy), 10) +
               f2(r->accuracy_stdev) + "\n";
      }
      const Metrics& b = group.front()->baseline;
      out += pad("baseline", 11) + pad("-", 6) + pad(f2(b.precision), 7) +
             pad(f2(b.recall), 7) + pad(f2(b.f1), 7) + pad(f2(b.accuracy), 10) + "-\n\n";
    }
  }
  return out;
}

inline std::string render_eval_csv(const std::vector<EvalReport>& reports) {
  using serdetail::f2;
  std::string out =
      "setting,target,devices,algorithm,precision,recall,f1,accuracy,accuracy_stdev\n";
  for (const auto& r : reports) {
    out += std::string(r.setting == EvalSetting::HoldOut ? "holdout" : "loso") + "," +
           target_name(r.target) + "," + sensor_config_name(r.config) + "," +
           algorithm_name(r.algorithm) + "," + f2(r.mean.precision) + "," +
           f2(r.mean.recall) + "," + f2(r.mean.f1) + "," + f2(r.mean.accuracy) + "," +
           f2(r.accuracy_stdev) + "\n";
  }
  for (const auto& r : reports) {
    out += std::string(r.setting == EvalSetting::HoldOut ? "holdout" : "loso") + "," +
           target_name(r.target) + "," + sensor_config_name(r.config) + ",baseline," +
           f2(r.baseline.precision) + "," + f2(r.baseline.recall) + "," + f2(r.baseline.f1) +
           "," + f2(r.baseline.accuracy) + ",\n";
    break;  // baseline identical across reports of the same dataset
  }
  return out;
}

// fixed-effect table with dual-convention p-values and deviance shares
inline std::string render_lmm_table(const LmmFit& f) {
  using serdetail::f2;
  using serdetail::pad;
  std::string out;
  out += pad("Fixed Effects", 15) + pad("Estimate", 12) +
         pad("Upper p (" + std::to_string(f.dof_upper) + " d.f.)", 20) +
         pad("Lower p (" + std::to_string(f.dof_lower) + " d.f.)", 20) + "Dev. explained\n";
  for (Eigen::Index j = 1; j < f.beta.size(); ++j) {
    auto i = static_cast<std::size_t>(j);
    std::string est = f2(f.beta(j));
    if (f.p_upper[i] < 0.05) est += " (*)";
    std::string dev = f.deviance_explained_pct.size() >= i
                          ? serdetail::f2(f.deviance_explained_pct[i - 1]) + "%"
                          : "-";
    out += pad(f.term_names[i], 15) + pad(est, 12) + pad(f2(f.p_upper[i]), 20) +
           pad(f2(f.p_lower[i]), 20) + dev + "\n";
  }
  char line[160];
  std::snprintf(line, sizeof(line),
                "\nModel vs null: chi2(%d) = %.1f, p = %.3g; total deviance explained %.2f%%\n",
                f.lr_dof, f.lr_chi2, f.lr_p, f.total_deviance_explained_pct);
  out += line;
  std::snprintf(line, sizeof(line),
                "Random intercept variance %.4f, residual variance %.4f (REML)\n", f.sigma2_u,
                f.sigma2_e);
  out += line;
  return out;
}

}  // namespace affectpipe

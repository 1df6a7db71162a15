// affectpipe: biometric recordings of programming sessions -> emotion
// classification datasets, evaluation reports, and progress-emotion analyses.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "affectpipe/eval.hpp"
#include "affectpipe/ingest.hpp"
#include "affectpipe/lmm.hpp"
#include "affectpipe/pipeline.hpp"
#include "affectpipe/serialize.hpp"
#include "affectpipe/synth.hpp"
#include "affectpipe/util.hpp"

namespace ap = affectpipe;
using ap::json;

namespace {

ap::Provenance base_provenance(std::uint64_t seed) {
  return {{"tool", "affectpipe"},
          {"tool_version", ap::kToolVersion},
          {"seed", std::to_string(seed)}};
}

void add_input_digests(ap::Provenance& prov, const std::vector<std::string>& inputs) {
  for (const auto& p : inputs) prov.emplace_back("input " + p, ap::digest_file(p));
}

json provenance_json(const ap::Provenance& prov) {
  json j = json::object();
  for (const auto& [k, v] : prov) j[k] = v;
  return j;
}

std::vector<ap::SessionRecord> load_sorted_study(const std::string& study_path) {
  return ap::load_study(study_path);
}

ap::SensorConfig parse_devices(const std::string& devices) {
  auto c = ap::sensor_config_from_name(devices);
  if (!c) throw CLI::ValidationError("--devices must be full, empatica, or brainlink");
  return *c;
}

int run_synth(const std::string& outdir, ap::SynthConfig cfg) {
  ap::SynthStudy study = ap::generate_study(cfg);
  ap::Provenance prov = base_provenance(cfg.seed);
  ap::write_study(study.sessions, outdir, prov);

  json truth;
  truth["provenance"] = provenance_json(prov);
  truth["lmm"] = {{"beta", study.lmm_beta},
                  {"sigma_u", study.lmm_sigma_u},
                  {"sigma_e", study.lmm_sigma_e}};
  json wins = json::array();
  for (const auto& w : study.truth)
    wins.push_back({{"subject_id", w.subject_id},
                    {"obs_idx", w.obs_idx},
                    {"valence", w.positive_valence ? "Positive" : "Negative"},
                    {"arousal", w.high_arousal ? "High" : "Low"},
                    {"scr_count", w.scr_count}});
  truth["windows"] = wins;
  ap::write_file(std::filesystem::path(outdir) / "truth.json", truth.dump(2) + "\n");

  std::cout << "wrote study with " << study.sessions.size() << " subjects to " << outdir
            << "\n";
  return 0;
}

int run_validate(const std::string& study_path) {
  auto sessions = load_sorted_study(study_path);
  bool all_ok = true;
  for (const auto& s : sessions) {
    ap::ValidationReport r = ap::validate_session(s);
    if (r.empty()) {
      std::cout << s.subject_id << ": ok\n";
      continue;
    }
    for (const auto& v : r.violations) {
      std::cout << s.subject_id << ": " << (v.warning ? "warning" : "violation") << " "
                << v.field << " (" << v.rule << ")"
                << (v.value.empty() ? "" : " value=" + v.value) << "\n";
      if (!v.warning) all_ok = false;
    }
  }
  return all_ok ? 0 : 1;
}

int run_features(const std::string& study_path, const std::string& out,
                 const std::string& devices, const std::string& overrides_path, bool strict,
                 bool per_window_eda) {
  auto sessions = load_sorted_study(study_path);
  ap::PipelineOptions opt;
  opt.config = parse_devices(devices);
  opt.decompose_whole_trace = !per_window_eda;
  opt.threads = ap::max_threads();
  ap::OverrideMap ov;
  if (!overrides_path.empty()) ov = ap::load_overrides(overrides_path);
  ap::BuildGoldResult gold = ap::build_dataset(sessions, opt, ov, strict);

  ap::Provenance prov = base_provenance(0);
  prov.emplace_back("devices", devices);
  add_input_digests(prov, {study_path});
  ap::store_dataset(gold.dataset, out, prov);
  std::cout << "wrote " << gold.dataset.size() << " observations (" << devices << ", "
            << gold.dataset.feature_names.size() << " features) to " << out << "\n"
            << "valence " << gold.summary.positive_valence << " Positive / "
            << gold.summary.negative_valence << " Negative; arousal "
            << gold.summary.high_arousal << " High / " << gold.summary.low_arousal
            << " Low; ambiguous " << gold.summary.ambiguous_valence << "v/"
            << gold.summary.ambiguous_arousal << "a; unresolved "
            << gold.summary.unresolved.size() << "\n";
  return 0;
}

int run_label(const std::string& study_path, const std::string& out,
              const std::string& overrides_path, bool strict) {
  auto sessions = load_sorted_study(study_path);
  ap::OverrideMap ov;
  if (!overrides_path.empty()) ov = ap::load_overrides(overrides_path);

  json subjects = json::array();
  ap::GoldSummary summary;
  for (const auto& s : sessions) {
    ap::ElicitationProfile prof = ap::elicitation_means(s.subject_id, s.elicitation_ratings);
    for (std::size_t i = 0; i < s.interruptions.size(); ++i) {
      auto key = std::make_pair(s.subject_id, static_cast<int>(i));
      auto oit = ov.find(key);
      ap::GoldLabel g = ap::label_observation(s.interruptions[i], prof,
                                              oit == ov.end() ? nullptr : &oit->second);
      subjects.push_back(
          {{"subject_id", s.subject_id},
           {"obs_idx", i},
           {"valence", ap::label_name(g.valence)},
           {"arousal", ap::label_name(g.arousal)},
           {"ambiguous_valence", g.ambiguous_valence},
           {"ambiguous_arousal", g.ambiguous_arousal},
           {"resolution",
            g.resolution == ap::LabelResolution::ManualOverride ? "override" : "automatic"}});
      ++summary.observations;
      (g.valence == ap::ValenceLabel::Positive ? summary.positive_valence
                                               : summary.negative_valence)++;
      (g.arousal == ap::ArousalLabel::High ? summary.high_arousal : summary.low_arousal)++;
      if (g.ambiguous_valence) ++summary.ambiguous_valence;
      if (g.ambiguous_arousal) ++summary.ambiguous_arousal;
      if ((g.ambiguous_valence || g.ambiguous_arousal) &&
          g.resolution != ap::LabelResolution::ManualOverride)
        summary.unresolved.push_back(key);
    }
  }
  json j;
  ap::Provenance prov = base_provenance(0);
  add_input_digests(prov, {study_path});
  j["provenance"] = provenance_json(prov);
  j["labels"] = subjects;
  j["summary"] = {{"observations", summary.observations},
                  {"positive_valence", summary.positive_valence},
                  {"negative_valence", summary.negative_valence},
                  {"high_arousal", summary.high_arousal},
                  {"low_arousal", summary.low_arousal},
                  {"ambiguous_valence", summary.ambiguous_valence},
                  {"ambiguous_arousal", summary.ambiguous_arousal},
                  {"unresolved", summary.unresolved.size()}};
  if (!out.empty()) ap::write_file(out, j.dump(2) + "\n");
  std::cout << j["summary"].dump(2) << "\n";
  if (strict && !summary.unresolved.empty())
    ap::fail(ap::Errc::UnresolvedAmbiguity,
             std::to_string(summary.unresolved.size()) + " ambiguous instance(s) unresolved");
  return 0;
}

int run_evaluate(const std::string& data_path, const std::string& out,
                 const std::string& setting, const std::string& devices,
                 const std::vector<std::string>& algs, const std::string& target_str,
                 int runs, std::uint64_t seed) {
  ap::LabeledDataset d = ap::load_dataset(data_path);
  ap::SensorConfig config;
  if (devices.empty()) {
    config = ap::SensorConfig::FullSet;
    for (ap::SensorConfig c : {ap::SensorConfig::FullSet, ap::SensorConfig::EmpaticaOnly,
                               ap::SensorConfig::BrainlinkOnly})
      if (d.feature_names == ap::feature_names(c)) config = c;
  } else {
    config = parse_devices(devices);
    d = d.project(ap::feature_names(config));
  }

  std::vector<ap::Target> targets;
  if (target_str == "both")
    targets = {ap::Target::Valence, ap::Target::Arousal};
  else if (auto t = ap::target_from_name(target_str))
    targets = {*t};
  else
    throw CLI::ValidationError("--target must be valence, arousal, or both");

  std::vector<ap::AlgorithmId> ids;
  for (const auto& a : algs) {
    auto id = ap::algorithm_from_name(a);
    if (!id) throw CLI::ValidationError("unknown algorithm '" + a + "'");
    ids.push_back(*id);
  }

  json reports = json::array();
  std::vector<ap::EvalReport> all;
  for (ap::Target target : targets) {
    for (ap::AlgorithmId alg : ids) {
      ap::EvalReport r;
      if (setting == "holdout")
        r = ap::holdout_eval(d, alg, ap::default_grid(alg), target, runs, seed);
      else if (setting == "loso")
        r = ap::loso_eval(d, alg, ap::default_grid(alg), target, seed);
      else
        throw CLI::ValidationError("--setting must be holdout or loso");
      r.config = config;
      all.push_back(r);
      reports.push_back(ap::to_json(r));
    }
  }
  json j;
  ap::Provenance prov = base_provenance(seed);
  add_input_digests(prov, {data_path});
  j["provenance"] = provenance_json(prov);
  j["reports"] = reports;
  if (!out.empty()) ap::write_file(out, j.dump(2) + "\n");
  std::cout << ap::render_eval_table(all);
  return 0;
}

int run_lmm(const std::string& study_path, const std::string& out) {
  auto sessions = load_sorted_study(study_path);
  auto obs = ap::standardize_scores(ap::sam_observations(sessions));
  ap::LmmFit fit = ap::analyze_lmm(obs);
  json j;
  ap::Provenance prov = base_provenance(0);
  add_input_digests(prov, {study_path});
  j["provenance"] = provenance_json(prov);
  j["fit"] = ap::to_json(fit);
  if (!out.empty()) ap::write_file(out, j.dump(2) + "\n");
  std::cout << ap::render_lmm_table(fit);
  return 0;
}

int run_report(const std::vector<std::string>& eval_paths, const std::string& lmm_path,
               const std::string& out, bool csv) {
  std::string text;
  if (!eval_paths.empty()) {
    std::vector<ap::EvalReport> reports;
    for (const auto& p : eval_paths) {
      json j = json::parse(ap::read_file(p));
      for (const auto& r : j.at("reports")) reports.push_back(ap::eval_report_from_json(r));
    }
    text += csv ? ap::render_eval_csv(reports) : ap::render_eval_table(reports);
  }
  if (!lmm_path.empty()) {
    json j = json::parse(ap::read_file(lmm_path));
    const json& f = j.at("fit");
    ap::LmmFit fit;
    fit.term_names = ap::lmm_term_names();
    const auto& terms = f.at("fixed_effects");
    fit.beta.resize(static_cast<Eigen::Index>(terms.size()));
    fit.stderrs.resize(fit.beta.size());
    Eigen::Index i = 0;
    for (const auto& t : terms) {
      fit.beta(i) = t.at("estimate").get<double>();
      fit.stderrs(i) = t.at("stderr").get<double>();
      fit.p_upper.push_back(t.at("p_upper").get<double>());
      fit.p_lower.push_back(t.at("p_lower").get<double>());
      ++i;
    }
    fit.sigma2_u = f.at("sigma2_u").get<double>();
    fit.sigma2_e = f.at("sigma2_e").get<double>();
    fit.dof_upper = f.at("dof_upper").get<int>();
    fit.dof_lower = f.at("dof_lower").get<int>();
    fit.lr_chi2 = f.at("lr_test").at("chi2").get<double>();
    fit.lr_dof = f.at("lr_test").at("dof").get<int>();
    fit.lr_p = f.at("lr_test").at("p").get<double>();
    if (f.contains("deviance_explained")) {
      for (const auto& d : f.at("deviance_explained"))
        fit.deviance_explained_pct.push_back(d.at("pct").get<double>());
      fit.total_deviance_explained_pct = f.at("total_deviance_explained_pct").get<double>();
    }
    text += ap::render_lmm_table(fit);
  }
  if (!out.empty()) ap::write_file(out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biometric sessions -> emotion classification and progress analysis"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic study");
  ap::SynthConfig scfg;
  std::string synth_out;
  synth->add_option("--subjects", scfg.n_subjects, "number of subjects")->default_val(23);
  synth->add_option("--interruptions", scfg.n_interruptions, "interruptions per session")
      ->default_val(6);
  synth->add_option("--seed", scfg.seed, "generator seed")->required();
  synth->add_option("-o,--out", synth_out, "output study directory")->required();
  synth->add_option("--interval-s", scfg.interruption_interval_s,
                    "seconds between interruptions")
      ->default_val(300.0);
  synth->add_option("--scr-rate-high", scfg.eda_scr_rate_high_arousal,
                    "SCR bursts/min under high arousal");
  synth->add_option("--scr-rate-low", scfg.eda_scr_rate_low_arousal,
                    "SCR bursts/min under low arousal");
  synth->add_option("--hr-delta", scfg.hr_delta_high_arousal, "bpm added under high arousal");
  synth->add_option("--alpha-suppression", scfg.alpha_suppression_negative_valence,
                    "alpha power factor under negative valence");
  synth->add_option("--bvp-amp-factor", scfg.bvp_amplitude_negative_valence,
                    "BVP amplitude factor under negative valence");
  synth->add_flag("--no-hr-trace", [&scfg](std::int64_t) { scfg.include_hr_trace = false; },
                  "omit the HR channel (exercises BVP-derived HR)");

  // validate
  auto* validate = app.add_subcommand("validate", "check session invariants");
  std::string v_study;
  validate->add_option("--study", v_study, "study.json path")->required();

  // features
  auto* features = app.add_subcommand("features", "sessions -> labeled dataset CSV");
  std::string f_study, f_out, f_devices{"full"}, f_overrides;
  bool f_strict = false, f_per_window = false;
  features->add_option("--study", f_study, "study.json path")->required();
  features->add_option("-o,--out", f_out, "output dataset CSV")->required();
  features->add_option("--devices", f_devices, "full|empatica|brainlink");
  features->add_option("--overrides", f_overrides, "manual label overrides CSV");
  features->add_flag("--strict", f_strict, "fail on unresolved ambiguous labels");
  features->add_flag("--per-window-eda", f_per_window,
                     "decompose each window separately instead of the whole trace");

  // label
  auto* label = app.add_subcommand("label", "gold label summary");
  std::string l_study, l_out, l_overrides;
  bool l_strict = false;
  label->add_option("--study", l_study, "study.json path")->required();
  label->add_option("-o,--out", l_out, "output label JSON");
  label->add_option("--overrides", l_overrides, "manual label overrides CSV");
  label->add_flag("--strict", l_strict, "fail on unresolved ambiguous labels");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "train and evaluate classifiers");
  std::string e_data, e_out, e_setting{"holdout"}, e_devices, e_target{"both"};
  std::vector<std::string> e_algs{"nb", "knn", "j48", "svm", "mlp", "rf"};
  int e_runs = 10;
  std::uint64_t e_seed = 0;
  evaluate->add_option("--data", e_data, "dataset CSV")->required();
  evaluate->add_option("-o,--out", e_out, "output report JSON");
  evaluate->add_option("--setting", e_setting, "holdout|loso");
  evaluate->add_option("--devices", e_devices, "project dataset to full|empatica|brainlink");
  evaluate->add_option("--alg", e_algs, "algorithms to run")->delimiter(',');
  evaluate->add_option("--target", e_target, "valence|arousal|both");
  evaluate->add_option("--runs", e_runs, "hold-out repetitions")->default_val(10);
  evaluate->add_option("--seed", e_seed, "evaluation seed")->required();

  // lmm
  auto* lmm = app.add_subcommand("lmm", "progress ~ emotions mixed model");
  std::string m_study, m_out;
  lmm->add_option("--study", m_study, "study.json path")->required();
  lmm->add_option("-o,--out", m_out, "output fit JSON");

  // report
  auto* report = app.add_subcommand("report", "render tables from report JSON");
  std::vector<std::string> r_evals;
  std::string r_lmm, r_out;
  bool r_csv = false;
  report->add_option("--eval", r_evals, "evaluation report JSON file(s)");
  report->add_option("--lmm", r_lmm, "mixed-model fit JSON");
  report->add_option("-o,--out", r_out, "output file");
  report->add_flag("--csv", r_csv, "emit CSV instead of text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_out, scfg);
    if (validate->parsed()) return run_validate(v_study);
    if (features->parsed())
      return run_features(f_study, f_out, f_devices, f_overrides, f_strict, f_per_window);
    if (label->parsed()) return run_label(l_study, l_out, l_overrides, l_strict);
    if (evaluate->parsed())
      return run_evaluate(e_data, e_out, e_setting, e_devices, e_algs, e_target, e_runs,
                          e_seed);
    if (lmm->parsed()) return run_lmm(m_study, m_out);
    if (report->parsed()) return run_report(r_evals, r_lmm, r_out, r_csv);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ap::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

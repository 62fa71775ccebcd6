// icui: command-line front end for the interpretable mortality-model toolkit.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>

#include <CLI11.hpp>

#include "icui/icui.hpp"

namespace {

using namespace icui;

struct DataFlags {
  std::string input;
  std::string preset = "none";
  std::string plan;
  std::string label = "icu_death";

  void add(CLI::App* cmd, const std::string& default_preset) {
    preset = default_preset;
    cmd->add_option("-i,--input", input, "Input CSV (header row, empty cell = missing)")->required();
    cmd->add_option("--preset", preset, "Column preset: dataset1, dataset2 or none")
        ->capture_default_str();
    cmd->add_option("--plan", plan, "Preprocessing plan JSON (overrides --preset)");
    cmd->add_option("--label", label, "Label column")->capture_default_str();
  }

  PreprocessPlan resolve() const {
    PreprocessPlan p;
    if (!plan.empty()) return load_plan(plan);
    if (preset != "none") p = preset_plan(preset);
    p.label_column = label;
    return p;
  }

  Dataset load(bool require_label) const {
    const auto plan_ = resolve();
    return apply_preprocess(load_csv(input, std::nullopt, plan_.label_column), plan_,
                            require_label);
  }
};

std::string sidecar_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".meta.json");
  return p.string();
}

void print_summary(const Dataset& ds) {
  const auto s = summarize(ds);
  nlohmann::ordered_json rates = nlohmann::ordered_json::object();
  for (const auto& [name, rate] : s.missing_rate) rates[name] = rate;
  nlohmann::ordered_json j{{"n_rows", s.n_rows}, {"n_features", ds.columns.size()}};
  j["prevalence"] = ds.labels.empty() ? nlohmann::ordered_json(nullptr)
                                      : nlohmann::ordered_json(s.prevalence);
  j["missing_rate"] = rates;
  std::cout << j.dump(2) << '\n';
}

Dataset complete_or_imputed(const Dataset& ds, const std::string& strategy, std::uint64_t seed) {
  if (!ds.has_missing()) return ds;
  if (strategy == "drop") {
    auto out = drop_incomplete_rows(ds);
    std::cerr << "dropped " << ds.n_rows - out.n_rows << " incomplete rows\n";
    return out;
  }
  if (strategy != "impute") throw ValidationError("unknown strategy '" + strategy + "'");
  ImputeConfig cfg;
  cfg.cv.seed = derive_seed(seed, "impute");
  cfg.cv.estimate_selection = false;
  return impute(ds, fit_imputation(ds, cfg).model);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icui: random forest and boosted-tree mortality models with Gini, TreeSHAP and "
               "cluster-based feature importance"};
  app.require_subcommand(1);
  int threads = -1;
  app.add_option("--threads", threads, "Worker threads (0 = all cores; default: ICUI_THREADS)");

  // synth
  SynthSpec synth;
  std::string synth_out;
  auto* c_synth = app.add_subcommand("synth", "Write a seeded synthetic cohort CSV");
  c_synth->add_option("--rows", synth.n_rows, "Row count")->capture_default_str();
  c_synth->add_option("--features", synth.n_features, "Feature count")->capture_default_str();
  c_synth->add_option("--signals", synth.n_signal, "Planted signal features")->capture_default_str();
  c_synth->add_option("--prevalence", synth.prevalence, "Positive rate")->capture_default_str();
  c_synth->add_option("--missing", synth.missing_rate, "MCAR missing-cell rate")->capture_default_str();
  c_synth->add_option("--effect-scale", synth.effect_scale, "Signal strength multiplier")
      ->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  c_synth->add_option("-o,--out", synth_out, "Output CSV (metadata goes to <name>.meta.json)")
      ->required();

  // prep
  DataFlags prep_data;
  std::string prep_out;
  bool prep_drop = false;
  auto* c_prep = app.add_subcommand("prep", "Apply a column plan and report the cohort summary");
  prep_data.add(c_prep, "dataset2");
  c_prep->add_option("-o,--out", prep_out, "Write the preprocessed CSV here");
  c_prep->add_flag("--drop-incomplete", prep_drop, "Drop rows with any missing cell");

  // impute
  DataFlags imp_data;
  std::string imp_out, imp_scores, imp_groups, imp_algorithm = "auto";
  std::uint64_t imp_seed = 7;
  NestedCvConfig imp_cv;
  ImputeParams imp_params;
  std::size_t imp_max_sel = 2000;
  auto* c_imp = app.add_subcommand("impute", "Fill missing cells (A0 median/mode, A1-A3 boosted)");
  imp_data.add(c_imp, "none");
  c_imp->add_option("-o,--out", imp_out, "Output CSV")->required();
  c_imp->add_option("--algorithm", imp_algorithm, "auto (nested CV) or A0, A1, A2, A3")
      ->capture_default_str();
  c_imp->add_option("--scores", imp_scores, "Write the selection score table here");
  c_imp->add_option("--groups", imp_groups, "Variable-type group JSON {column: group}");
  c_imp->add_option("--seed", imp_seed, "Seed")->capture_default_str();
  c_imp->add_option("--outer-k", imp_cv.outer_k, "Outer folds")->capture_default_str();
  c_imp->add_option("--inner-k", imp_cv.inner_k, "Inner folds")->capture_default_str();
  bool imp_skip_nested = false;
  c_imp->add_flag("--skip-nested", imp_skip_nested, "Skip the inner loop that scores the selection rule");
  c_imp->add_option("--min-rows", imp_params.min_rows, "Fewest complete cases to fit a model")
      ->capture_default_str();
  c_imp->add_option("--max-selection-rows", imp_max_sel, "Row cap for selection (0 = none)")
      ->capture_default_str();
  c_imp->add_option("--max-train-rows", imp_params.max_train_rows, "Row cap per imputer fit (0 = none)")
      ->capture_default_str();

  // train
  DataFlags train_data;
  std::string train_out, train_model = "rf", train_strategy = "drop";
  std::uint64_t train_seed = 7;
  ForestParams train_rf;
  BoostParams train_bst;
  auto* c_train = app.add_subcommand("train", "Fit one model on the whole dataset and save it");
  train_data.add(c_train, "dataset2");
  c_train->add_option("--model", train_model, "rf or boosted")->capture_default_str();
  c_train->add_option("-o,--out", train_out, "Model JSON")->required();
  c_train->add_option("--strategy", train_strategy, "Missing cells: drop or impute")
      ->capture_default_str();
  c_train->add_option("--seed", train_seed, "Seed")->capture_default_str();
  c_train->add_option("--trees", train_rf.n_trees, "Forest trees")->capture_default_str();
  c_train->add_option("--min-samples-leaf", train_rf.min_samples_leaf, "Forest leaf size")
      ->capture_default_str();
  c_train->add_option("--mtry", train_rf.mtry, "Features per split (0 = ceil sqrt p)")
      ->capture_default_str();
  c_train->add_option("--rounds", train_bst.n_rounds, "Boosting rounds")->capture_default_str();
  c_train->add_option("--eta", train_bst.eta, "Learning rate")->capture_default_str();
  c_train->add_option("--depth", train_bst.max_depth, "Boosted tree depth")->capture_default_str();
  c_train->add_option("--lambda", train_bst.lambda, "L2 leaf penalty")->capture_default_str();

  // explain
  DataFlags exp_data;
  std::string exp_model, exp_out, exp_importance;
  auto* c_exp = app.add_subcommand("explain", "TreeSHAP attributions for every row of a dataset");
  exp_data.add(c_exp, "dataset2");
  c_exp->add_option("-m,--model", exp_model, "Model JSON from train")->required();
  c_exp->add_option("-o,--out", exp_out, "Attribution CSV")->required();
  c_exp->add_option("--importance", exp_importance, "Write mean |SHAP| per feature here");

  // report
  std::string report_dir;
  auto* c_report = app.add_subcommand("report", "Re-render the SVG figures of a run-all directory");
  c_report->add_option("-d,--dir", report_dir, "run-all output directory")->required();

  // run-all
  std::string cfg_path;
  RunConfig overrides;
  std::string o_input, o_output, o_model, o_strategy, o_preset, o_plan, o_label, o_impute;
  std::optional<std::uint64_t> o_seed;
  std::optional<std::size_t> o_k, o_clusters;
  std::optional<int> o_trees, o_rounds;
  auto* c_all = app.add_subcommand(
      "run-all", "prep, drop or impute, 5-fold CV, importance clustering and figures.\n"
                 "AUPRC is step-wise average precision (no trapezoidal interpolation).");
  c_all->add_option("-c,--config", cfg_path, "Run config JSON (flags override its keys)");
  c_all->add_option("-i,--input", o_input, "Input CSV");
  c_all->add_option("-o,--output", o_output, "Output directory");
  c_all->add_option("--model", o_model, "rf, boosted or both");
  c_all->add_option("--strategy", o_strategy, "drop or impute");
  c_all->add_option("--preset", o_preset, "dataset1, dataset2 or none");
  c_all->add_option("--plan", o_plan, "Preprocessing plan JSON");
  c_all->add_option("--label", o_label, "Label column");
  c_all->add_option("--impute-algorithm", o_impute, "auto or A0..A3");
  c_all->add_option("--seed", o_seed, "Seed");
  c_all->add_option("--k", o_k, "Cross-validation folds");
  c_all->add_option("--clusters", o_clusters, "K for importance clustering");
  c_all->add_option("--trees", o_trees, "Forest trees");
  c_all->add_option("--rounds", o_rounds, "Boosting rounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (threads >= 0) set_thread_count(threads);

    if (*c_synth) {
      const auto res = synth_generate(synth);
      write_csv(synth_out, res.data);
      write_text(sidecar_path(synth_out), synth_meta_json(synth, res.meta).dump(2) + "\n");
      std::cout << "wrote " << synth_out << " (" << synth.n_rows << " rows, prevalence "
                << format_fixed(res.meta.realized_prevalence, 4) << ")\n";
    } else if (*c_prep) {
      Dataset ds = prep_data.load(true);
      if (prep_drop) ds = drop_incomplete_rows(ds);
      if (!prep_out.empty()) write_csv(prep_out, ds);
      print_summary(ds);
    } else if (*c_imp) {
      const Dataset ds = imp_data.load(false);
      ImputeConfig cfg;
      cfg.algorithm = imp_algorithm;
      cfg.cv = imp_cv;
      cfg.cv.seed = derive_seed(imp_seed, "impute");
      cfg.cv.estimate_selection = !imp_skip_nested;
      cfg.params.min_rows = imp_params.min_rows;
      cfg.params.max_train_rows = imp_params.max_train_rows;
      cfg.max_selection_rows = imp_max_sel;
      if (!imp_groups.empty()) cfg.groups = load_groups(imp_groups, ds.column_names());
      if (cfg.algorithm != "auto") parse_impute_algorithm(cfg.algorithm);
      const auto fitted = fit_imputation(ds, cfg);
      write_csv(imp_out, impute(ds, fitted.model));
      if (!imp_scores.empty()) {
        std::ofstream sc(imp_scores, std::ios::binary);
        if (!sc) throw ValidationError("cannot write '" + imp_scores + "'");
        write_score_table(sc, fitted.selections);
      }
      for (const auto& w : fitted.model.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& s : fitted.selections)
        std::cout << s.column << ": " << to_string(s.chosen) << '\n';
    } else if (*c_train) {
      const Dataset ds =
          complete_or_imputed(train_data.load(true), train_strategy, train_seed);
      const ModelKind kind = parse_model_kind(train_model);
      if (kind == ModelKind::rf) {
        forest_params_from_json(to_json(train_rf));
        save_model(train_out, fit_forest(ds, train_rf, train_seed));
      } else {
        train_bst.validate();
        save_model(train_out, fit_boosted(ds, train_bst, train_seed));
      }
      std::cout << "wrote " << train_out << " (" << ds.n_rows << " rows, " << ds.columns.size()
                << " features)\n";
    } else if (*c_exp) {
      const AnyModel model = load_model(exp_model);
      const Dataset ds = exp_data.load(false);
      const FeatureSchema& schema =
          std::visit([](const auto& m) -> const FeatureSchema& { return m.schema; }, model);
      const FeatureMatrix x = to_feature_matrix(ds, schema);
      const AttributionMatrix attr =
          std::visit([&](const auto& m) { return tree_shap(m, x); }, model);
      std::ofstream out(exp_out, std::ios::binary);
      if (!out) throw ValidationError("cannot write '" + exp_out + "'");
      write_attribution_csv(out, attr, schema.names);
      if (!exp_importance.empty()) {
        const auto prof = global_shap_importance(attr);
        std::ofstream imp(exp_importance, std::ios::binary);
        if (!imp) throw ValidationError("cannot write '" + exp_importance + "'");
        csv::write_row(imp, {"feature", "importance"});
        for (std::size_t f = 0; f < schema.size(); ++f)
          csv::write_row(imp, {schema.names[f], format_double(prof.scores[f])});
      }
      std::cout << "wrote " << exp_out << " (" << x.n_rows << " rows, " << to_string(attr.output_space)
                << " space)\n";
    } else if (*c_report) {
      for (const auto& f : render_report(report_dir)) std::cout << "wrote " << f << '\n';
    } else if (*c_all) {
      RunConfig cfg = cfg_path.empty() ? RunConfig{} : load_config(cfg_path);
      if (!o_input.empty()) cfg.input = o_input;
      if (!o_output.empty()) cfg.output = o_output;
      if (!o_model.empty()) cfg.model = o_model;
      if (!o_strategy.empty()) cfg.strategy = parse_strategy(o_strategy);
      if (!o_preset.empty()) cfg.preset = o_preset;
      if (!o_plan.empty()) cfg.plan = o_plan;
      if (!o_label.empty()) cfg.label = o_label;
      if (!o_impute.empty()) cfg.impute.algorithm = o_impute;
      if (o_seed) cfg.seed = *o_seed;
      if (o_k) cfg.k = *o_k;
      if (o_clusters) cfg.k_clusters = *o_clusters;
      if (o_trees) cfg.rf.n_trees = *o_trees;
      if (o_rounds) cfg.boosted.n_rounds = *o_rounds;
      cfg.rf = forest_params_from_json(to_json(cfg.rf));
      cfg.boosted.validate();
      run_all(cfg, &std::cerr);
      std::cout << "wrote " << cfg.output << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

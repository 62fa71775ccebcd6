#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "icui/cluster_importance.hpp"
#include "icui/config.hpp"
#include "icui/data_model.hpp"
#include "icui/evaluate.hpp"
#include "icui/impute.hpp"
#include "icui/report.hpp"

namespace icui {

inline constexpr const char* kVersion = "1.0.0";

struct RunOutcome {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  double prevalence = 0.0;
  std::vector<CvResult> results;
  std::vector<std::string> warnings;
  std::vector<std::string> files;  // written, relative to the output directory
};

/// Per model: feature, mean importance, one column per fold; rows by mean
/// importance descending. Flagged folds are left out.
inline void write_importance_csv(std::ostream& os, const CvResult& r) {
  std::vector<std::size_t> folds;
  for (std::size_t f = 0; f < r.folds.size(); ++f)
    if (r.folds[f].importance) folds.push_back(f);
  const std::size_t nf = r.feature_names.size();
  std::vector<double> mean(nf, 0.0);
  for (auto f : folds)
    for (std::size_t i = 0; i < nf; ++i) mean[i] += r.folds[f].importance->scores[i];
  for (double& m : mean) m /= folds.empty() ? 1.0 : static_cast<double>(folds.size());
  std::vector<std::size_t> order(nf);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  std::vector<std::string> header{"feature", "mean_importance"};
  for (auto f : folds) header.push_back("fold" + std::to_string(f + 1));
  csv::write_row(os, header);
  for (auto i : order) {
    std::vector<std::string> row{r.feature_names[i], format_double(mean[i])};
    for (auto f : folds) row.push_back(format_double(r.folds[f].importance->scores[i]));
    csv::write_row(os, row);
  }
}

inline nlohmann::ordered_json clusters_json(const CvResult& r) {
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& art : r.folds) {
    if (!art.clusters) continue;
    nlohmann::ordered_json clusters = nlohmann::ordered_json::array();
    for (const auto& c : art.clusters->ranked_clusters) {
      std::vector<std::string> members;
      for (auto m : c.members) members.push_back(r.feature_names[m]);
      clusters.push_back({{"rank", c.rank},
                          {"aggregated_importance", c.aggregated_importance},
                          {"centroid", c.centroid},
                          {"members", members}});
    }
    folds.push_back({{"fold", art.clusters->fold},
                     {"k", art.clusters->ranked_clusters.size()},
                     {"warnings", art.clusters->warnings},
                     {"clusters", std::move(clusters)}});
  }
  return {{"model", to_string(r.summary.model)}, {"folds", std::move(folds)}};
}

inline HeatmapTable heatmap_of(const CvResult& r) {
  std::vector<ClusterReport> reports;
  std::vector<ImportanceProfile> profiles;
  for (const auto& art : r.folds)
    if (art.clusters && art.importance) {
      reports.push_back(*art.clusters);
      profiles.push_back(*art.importance);
    }
  return build_heatmap(reports, profiles, r.feature_names);
}

namespace detail {

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_curve_files(const std::filesystem::path& dir, const std::vector<CvResult>& results,
                              RunOutcome& out) {
  const bool tagged = results.size() > 1;
  const std::size_t k = results.front().summary.folds.size();
  for (std::size_t f = 0; f < k; ++f) {
    const std::string roc_name = "roc_fold" + std::to_string(f + 1) + ".csv";
    const std::string pr_name = "pr_fold" + std::to_string(f + 1) + ".csv";
    std::ofstream roc(dir / roc_name, std::ios::binary), pr(dir / pr_name, std::ios::binary);
    if (!roc || !pr) throw ValidationError("cannot write curve files in '" + dir.string() + "'");
    csv::write_row(roc, tagged ? std::vector<std::string>{"model", "fpr", "tpr"}
                               : std::vector<std::string>{"fpr", "tpr"});
    csv::write_row(pr, tagged ? std::vector<std::string>{"model", "recall", "precision"}
                              : std::vector<std::string>{"recall", "precision"});
    for (const auto& r : results) {
      const auto& m = r.summary.folds[f];
      const std::string model = to_string(r.summary.model);
      auto emit = [&](std::ostream& os, const std::vector<CurvePoint>& pts) {
        for (const auto& p : pts) {
          std::vector<std::string> row;
          if (tagged) row.push_back(model);
          row.push_back(format_double(p.x));
          row.push_back(format_double(p.y));
          csv::write_row(os, row);
        }
      };
      emit(roc, m.roc_points);
      emit(pr, m.pr_points);
    }
    out.files.push_back(roc_name);
    out.files.push_back(pr_name);
  }
}

}  // namespace detail

/// Loads data, applies the plan, drops or imputes, cross-validates each model,
/// clusters importances and writes every table and figure into cfg.output.
/// All outputs except run_info.json are a pure function of the config.
inline RunOutcome run_all(const RunConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  if (cfg.input.empty()) throw ValidationError("no input file given");
  namespace fs = std::filesystem;
  const Dataset raw = load_csv(cfg.input, std::nullopt, cfg.label);
  Dataset ds = apply_preprocess(raw, resolve_plan(cfg));
  if (ds.columns.empty()) throw ValidationError("no feature columns left after preprocessing");

  CvOptions opt;
  opt.k = cfg.k;
  opt.k_clusters = cfg.k_clusters;
  opt.seed = cfg.seed;
  opt.stratified = cfg.stratified;
  RunOutcome out;
  if (cfg.strategy == Strategy::drop) {
    ds = drop_incomplete_rows(ds);
  } else if (ds.has_missing()) {
    const ImputeConfig icfg = impute_config(cfg, ds.column_names());
    if (cfg.impute.fit_on_full) {
      const auto fitted = fit_imputation(ds, icfg);
      out.warnings = fitted.model.warnings;
      ds = impute(ds, fitted.model);
    } else {
      opt.impute = icfg;
    }
  }
  out.n_rows = ds.n_rows;
  out.n_features = ds.columns.size();
  out.prevalence = prevalence(ds.labels);
  if (log)
    *log << "rows " << out.n_rows << ", features " << out.n_features << ", prevalence "
         << format_fixed(out.prevalence, 4) << '\n';

  const auto prepared = prepare_folds(ds, opt);
  for (std::size_t f = 0; f < prepared.size(); ++f)
    for (const auto& w : prepared[f].warnings)
      out.warnings.push_back("fold " + std::to_string(f + 1) + ": " + w);
  for (ModelKind kind : cfg.models()) {
    ModelSpec spec{kind, cfg.rf, cfg.boosted};
    out.results.push_back(run_cv(prepared, spec, opt, out.prevalence, ds.column_names()));
    const auto& s = out.results.back().summary;
    for (const auto& m : s.folds)
      if (m.flagged)
        out.warnings.push_back(to_string(kind) + " fold " + std::to_string(m.fold) + ": " + m.error);
    if (log)
      *log << to_string(kind) << ": AUROC " << (s.auroc ? s.auroc->text : "n/a") << ", AUPRC "
           << (s.auprc ? s.auprc->text : "n/a") << '\n';
  }

  const fs::path dir(cfg.output);
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    write_text((dir / name).string(), text);
    out.files.push_back(name);
  };

  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto& r : out.results) models.push_back(summary_json(r.summary));
  nlohmann::ordered_json summary{{"n_rows", out.n_rows},
                                 {"n_features", out.n_features},
                                 {"prevalence", out.prevalence},
                                 {"seed", cfg.seed},
                                 {"models", std::move(models)}};
  write("summary.json", summary.dump(2) + "\n");
  detail::write_curve_files(dir, out.results, out);

  for (const auto& r : out.results) {
    const std::string model = to_string(r.summary.model);
    std::ostringstream imp;
    write_importance_csv(imp, r);
    write("importance_" + model + ".csv", imp.str());
    write("roc_" + model + ".svg", roc_svg(r.summary));
    write("pr_" + model + ".svg", pr_svg(r.summary));
    write("clusters_" + model + ".json", clusters_json(r).dump(2) + "\n");
    const bool any_clusters =
        std::any_of(r.folds.begin(), r.folds.end(), [](const auto& a) { return a.clusters.has_value(); });
    if (any_clusters) {
      const HeatmapTable t = heatmap_of(r);
      std::ostringstream hm;
      write_heatmap_csv(hm, t);
      write("heatmap_" + model + ".csv", hm.str());
      write("heatmap_" + model + ".svg", heatmap_svg(t, "Feature importance clusters (" + model + ")"));
    }
    if (r.summary.model == ModelKind::boosted && cfg.write_shap) {
      for (std::size_t f = 0; f < r.folds.size(); ++f) {
        if (!r.folds[f].attribution) continue;
        std::ostringstream sh;
        write_attribution_csv(sh, *r.folds[f].attribution, r.feature_names);
        write("shap_boosted_fold" + std::to_string(f + 1) + ".csv", sh.str());
      }
    }
  }
  for (std::size_t f = 0; f < prepared.size(); ++f) {
    if (prepared[f].selections.empty()) continue;
    std::ostringstream sc;
    write_score_table(sc, prepared[f].selections);
    write("impute_scores_fold" + std::to_string(f + 1) + ".csv", sc.str());
  }
  if (!out.warnings.empty()) {
    std::string text;
    for (const auto& w : out.warnings) text += w + "\n";
    write("warnings.txt", text);
  }

  nlohmann::ordered_json info{{"version", kVersion},
                              {"started_utc", detail::timestamp_utc()},
                              {"threads", thread_count()},
                              {"config", to_json(cfg)},
                              {"files", out.files}};
  write_text((dir / "run_info.json").string(), info.dump(2) + "\n");
  if (log)
    for (const auto& w : out.warnings) *log << "warning: " << w << '\n';
  return out;
}

namespace detail {

inline std::vector<CurvePoint> read_curve(const std::filesystem::path& path, const std::string& model,
                                          const std::string& x_name, const std::string& y_name) {
  const Dataset t = load_csv(path.string(), std::nullopt, "");
  const Column& xs = t.column(x_name);
  const Column& ys = t.column(y_name);
  const auto mi = t.find("model");
  std::vector<CurvePoint> pts;
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    if (mi && cell_text(t.columns[*mi], r) != model) continue;
    if (!xs.is_numeric() || !ys.is_numeric() || xs.missing[r] || ys.missing[r])
      throw ValidationError("malformed curve file '" + path.string() + "'");
    pts.push_back({xs.numeric[r], ys.numeric[r]});
  }
  return pts;
}

inline HeatmapTable read_heatmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  const auto header = csv::split_record(line);
  if (header.size() < 2 || header[0] != "feature" || header[1] != "mean_importance")
    throw ValidationError("malformed heatmap file '" + path.string() + "'");
  HeatmapTable t;
  for (std::size_t c = 2; c < header.size(); ++c) {
    unsigned fold = 0, rank = 0;
    if (std::sscanf(header[c].c_str(), "fold%u_cluster%u", &fold, &rank) != 2)
      throw ValidationError("malformed heatmap column '" + header[c] + "'");
    t.columns.emplace_back(fold, rank);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split_record(line);
    if (fields.size() != header.size())
      throw ValidationError("malformed heatmap row in '" + path.string() + "'");
    t.row_features.push_back(t.row_features.size());
    t.row_names.push_back(fields[0]);
    double v = 0.0;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (!parse_double(fields[c], v))
        throw ValidationError("malformed heatmap value '" + fields[c] + "'");
      (c == 1 ? t.mean_importance : t.cells).push_back(v);
    }
  }
  return t;
}

}  // namespace detail

/// Re-renders the SVG figures of a finished run from its CSV and JSON
/// outputs. Returns the files written.
inline std::vector<std::string> render_report(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(run_dir);
  std::ifstream in(dir / "summary.json");
  if (!in) throw ValidationError("no summary.json in '" + run_dir + "'");
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("summary.json: ") + e.what());
  }
  std::vector<std::string> written;
  try {
    for (const auto& mj : summary.at("models")) {
      CvSummary cv;
      const std::string model = mj.at("model").get<std::string>();
      cv.model = parse_model_kind(model);
      cv.k = mj.at("k").get<std::size_t>();
      cv.baseline = mj.at("baseline").get<double>();
      for (const auto& fj : mj.at("folds")) {
        FoldMetrics m;
        m.fold = fj.at("fold").get<std::size_t>();
        m.flagged = fj.at("flagged").get<bool>();
        if (!m.flagged) {
          m.auroc = fj.at("auroc").get<double>();
          m.auprc = fj.at("auprc").get<double>();
          const std::string f = std::to_string(m.fold);
          m.roc_points = detail::read_curve(dir / ("roc_fold" + f + ".csv"), model, "fpr", "tpr");
          m.pr_points =
              detail::read_curve(dir / ("pr_fold" + f + ".csv"), model, "recall", "precision");
        }
        cv.folds.push_back(std::move(m));
      }
      write_text((dir / ("roc_" + model + ".svg")).string(), roc_svg(cv));
      write_text((dir / ("pr_" + model + ".svg")).string(), pr_svg(cv));
      written.push_back("roc_" + model + ".svg");
      written.push_back("pr_" + model + ".svg");
      const fs::path hm = dir / ("heatmap_" + model + ".csv");
      if (fs::exists(hm)) {
        write_text((dir / ("heatmap_" + model + ".svg")).string(),
                   heatmap_svg(detail::read_heatmap(hm), "Feature importance clusters (" + model + ")"));
        written.push_back("heatmap_" + model + ".svg");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("summary.json: ") + e.what());
  }
  return written;
}

}  // namespace icui

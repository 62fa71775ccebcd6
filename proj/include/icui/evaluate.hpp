#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "icui/attribution.hpp"
#include "icui/boost.hpp"
#include "icui/cluster_importance.hpp"
#include "icui/common.hpp"
#include "icui/data_model.hpp"
#include "icui/forest.hpp"
#include "icui/impute.hpp"

namespace icui {

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

struct RocResult {
  double auc = 0.0;
  std::vector<CurvePoint> points;  // (fpr, tpr)
};

struct PrResult {
  double average_precision = 0.0;
  std::vector<CurvePoint> points;  // (recall, precision)
};

namespace detail {

struct ScoreBlock {
  std::int64_t pos = 0;
  std::int64_t neg = 0;
};

/// Groups rows into blocks of equal score, highest score first.
inline std::vector<ScoreBlock> score_blocks(std::span<const double> scores,
                                            std::span<const std::uint8_t> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<ScoreBlock> blocks;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || scores[order[i]] != scores[order[i - 1]]) blocks.emplace_back();
    (labels[order[i]] ? blocks.back().pos : blocks.back().neg) += 1;
  }
  return blocks;
}

inline void check_scores(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw ValidationError("scores and labels differ in length");
  for (double s : scores)
    if (std::isnan(s)) throw ValidationError("scores contain NaN");
}

}  // namespace detail

/// Mann-Whitney AUROC with mid-ranks for tied scores. Each block of tied
/// scores contributes one diagonal ROC segment.
inline RocResult auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  detail::check_scores(scores, labels);
  const auto n_pos = static_cast<std::int64_t>(std::count(labels.begin(), labels.end(), 1));
  const auto n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ValidationError("auroc: labels contain a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum keeps mid-ranks integral.
  std::int64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const auto twice_mid = static_cast<std::int64_t>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) twice_rank_sum += twice_mid;
    i = j;
  }
  RocResult out;
  const long double u = (static_cast<long double>(twice_rank_sum) / 2.0L) -
                        static_cast<long double>(n_pos) * static_cast<long double>(n_pos + 1) / 2.0L;
  out.auc = static_cast<double>(u / (static_cast<long double>(n_pos) * static_cast<long double>(n_neg)));

  out.points.push_back({0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  for (const auto& b : detail::score_blocks(scores, labels)) {
    tp += b.pos;
    fp += b.neg;
    out.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return out;
}

/// Step-wise average precision: sum over descending thresholds of
/// (recall gain) x precision, tied scores entering as one block. The curve
/// starts at recall 0 with the first block's precision.
inline PrResult auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  detail::check_scores(scores, labels);
  const auto n_pos = static_cast<std::int64_t>(std::count(labels.begin(), labels.end(), 1));
  if (n_pos == 0) throw ValidationError("auprc: no positive labels");
  PrResult out;
  std::int64_t tp = 0, seen = 0;
  long double ap = 0.0L;
  for (const auto& b : detail::score_blocks(scores, labels)) {
    const std::int64_t prev_tp = tp;
    tp += b.pos;
    seen += b.pos + b.neg;
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    if (out.points.empty()) out.points.push_back({0.0, precision});
    ap += static_cast<long double>(tp - prev_tp) / static_cast<long double>(n_pos) *
          (static_cast<long double>(tp) / static_cast<long double>(seen));
    out.points.push_back({static_cast<double>(tp) / static_cast<double>(n_pos), precision});
  }
  out.average_precision = static_cast<double>(ap);
  return out;
}

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::string text;  // "m ± s"
};

inline Aggregate aggregate(std::span<const double> values) {
  if (values.size() < 2) throw ValidationError("aggregate needs at least 2 folds");
  Aggregate a;
  const auto n = static_cast<double>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / (n - 1.0));
  a.text = format_fixed(a.mean, 3) + " ± " + format_fixed(a.std, 3);
  return a;
}

enum class ModelKind { rf, boosted };

inline std::string to_string(ModelKind k) { return k == ModelKind::rf ? "rf" : "boosted"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "rf") return ModelKind::rf;
  if (s == "boosted") return ModelKind::boosted;
  throw ValidationError("unknown model '" + s + "' (expected rf or boosted)");
}

struct ModelSpec {
  ModelKind kind = ModelKind::rf;
  ForestParams forest;
  BoostParams boost;
};

struct FoldMetrics {
  std::size_t fold = 0;  // 1-based
  double auroc = std::nan("");
  double auprc = std::nan("");
  std::vector<CurvePoint> roc_points;
  std::vector<CurvePoint> pr_points;
  std::size_t n_test = 0;
  std::size_t n_pos = 0;
  bool flagged = false;
  std::string error;
};

struct CvSummary {
  ModelKind model = ModelKind::rf;
  std::size_t k = 0;
  std::vector<FoldMetrics> folds;
  std::optional<Aggregate> auroc;  // empty if fewer than 2 folds succeeded
  std::optional<Aggregate> auprc;
  double baseline = 0.0;
};

struct FoldArtifacts {
  std::optional<ImportanceProfile> importance;
  std::optional<AttributionMatrix> attribution;  // boosted only, test-fold rows
  std::optional<ClusterReport> clusters;
  std::vector<std::string> warnings;
};

struct CvResult {
  CvSummary summary;
  std::vector<FoldArtifacts> folds;
  std::vector<std::string> feature_names;
};

struct CvOptions {
  std::size_t k = 5;
  std::size_t k_clusters = 20;
  std::uint64_t seed = 0;
  bool stratified = false;
  std::optional<ImputeConfig> impute;  // fit on each training split
};

namespace detail {

inline void score_fold(FoldMetrics& m, std::span<const double> scores,
                       std::span<const std::uint8_t> labels) {
  m.n_test = labels.size();
  m.n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  auto roc = auroc(scores, labels);
  auto pr = auprc(scores, labels);
  m.auroc = roc.auc;
  m.auprc = pr.average_precision;
  m.roc_points = std::move(roc.points);
  m.pr_points = std::move(pr.points);
}

}  // namespace detail

inline FoldAssignment cv_folds(const Dataset& ds, const CvOptions& opt) {
  return opt.stratified ? split_folds_stratified(ds.labels, opt.k, opt.seed)
                        : split_folds(ds.n_rows, opt.k, opt.seed);
}

/// One train/test split, already imputed when imputation is configured.
struct PreparedFold {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> test_rows;  // row indices into the source dataset
  std::vector<std::string> warnings;
  std::vector<ImputerSelection> selections;
  std::optional<std::string> error;
};

inline std::vector<PreparedFold> prepare_folds(const Dataset& ds, const CvOptions& opt) {
  if (ds.labels.size() != ds.n_rows) throw ValidationError("run_cv: dataset has no labels");
  if (!opt.impute && ds.has_missing())
    throw ValidationError("run_cv: dataset has missing cells and no imputation configured");
  const FoldAssignment folds = cv_folds(ds, opt);
  std::vector<PreparedFold> out(opt.k);
  for (std::size_t f = 0; f < opt.k; ++f) {
    PreparedFold& p = out[f];
    p.test_rows = folds.rows_in(f);
    try {
      p.train = select_rows(ds, folds.rows_not_in(f));
      p.test = select_rows(ds, p.test_rows);
      if (opt.impute) {
        ImputeConfig icfg = *opt.impute;
        icfg.cv.seed = derive_seed(opt.impute->cv.seed, "fold", f);
        auto fitted = fit_imputation(p.train, icfg);
        p.warnings = fitted.model.warnings;
        p.selections = std::move(fitted.selections);
        p.train = impute(p.train, fitted.model);
        p.test = impute(p.test, fitted.model);
      }
    } catch (const ValidationError& e) {
      p.error = e.what();
    }
  }
  return out;
}

/// k-fold cross-validation: each fold is held out once, the model is trained
/// on the rest, and the held-out fold is scored. Importance is the Gini
/// profile for forests and mean |TreeSHAP| over the held-out rows for
/// boosted models; each fold's profile is then clustered. A fold that fails
/// (for instance a single-class test split) is flagged and the run continues.
inline CvResult run_cv(const std::vector<PreparedFold>& prepared, const ModelSpec& spec,
                       const CvOptions& opt, double baseline,
                       const std::vector<std::string>& feature_names) {
  CvResult result;
  result.feature_names = feature_names;
  CvSummary& summary = result.summary;
  summary.model = spec.kind;
  summary.k = prepared.size();
  summary.baseline = baseline;
  summary.folds.resize(prepared.size());
  result.folds.resize(prepared.size());

  for (std::size_t f = 0; f < prepared.size(); ++f) {
    const PreparedFold& p = prepared[f];
    FoldMetrics& m = summary.folds[f];
    FoldArtifacts& art = result.folds[f];
    m.fold = f + 1;
    m.n_test = p.test_rows.size();
    art.warnings = p.warnings;
    try {
      if (p.error) throw ValidationError(*p.error);
      const FeatureMatrix xtrain = to_feature_matrix(p.train);
      const FeatureMatrix xtest = to_feature_matrix(p.test);
      const std::uint64_t model_seed = derive_seed(opt.seed, "fold-model", f);
      std::vector<double> scores;
      if (spec.kind == ModelKind::rf) {
        const auto model = fit_forest(xtrain, p.train.labels, spec.forest, model_seed);
        scores = predict_proba_forest(model, xtest);
        art.importance = forest_importance(model);
      } else {
        const auto model = fit_boosted(xtrain, p.train.labels, spec.boost, model_seed);
        scores = predict_proba_boosted(model, xtest);
        auto attr = tree_shap(model, xtest);
        attr.row_ids = p.test_rows;
        art.importance = global_shap_importance(attr);
        art.attribution = std::move(attr);
      }
      art.clusters = cluster_importance(*art.importance, opt.k_clusters,
                                        derive_seed(opt.seed, "cluster", f), f + 1);
      for (const auto& w : art.clusters->warnings) art.warnings.push_back(w);
      detail::score_fold(m, scores, p.test.labels);
    } catch (const ValidationError& e) {
      m.flagged = true;
      m.error = e.what();
    }
  }

  std::vector<double> aucs, aps;
  for (const auto& m : summary.folds)
    if (!m.flagged) {
      aucs.push_back(m.auroc);
      aps.push_back(m.auprc);
    }
  if (aucs.size() >= 2) {
    summary.auroc = aggregate(aucs);
    summary.auprc = aggregate(aps);
  }
  return result;
}

inline double prevalence(std::span<const std::uint8_t> labels) {
  if (labels.empty()) return 0.0;
  return static_cast<double>(std::count(labels.begin(), labels.end(), 1)) /
         static_cast<double>(labels.size());
}

inline CvResult run_cv(const Dataset& ds, const ModelSpec& spec, const CvOptions& opt) {
  return run_cv(prepare_folds(ds, opt), spec, opt, prevalence(ds.labels), ds.column_names());
}

inline void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& points,
                            const std::string& x_name, const std::string& y_name) {
  csv::write_row(os, {x_name, y_name});
  for (const auto& p : points) csv::write_row(os, {format_double(p.x), format_double(p.y)});
}

inline nlohmann::ordered_json aggregate_json(const std::optional<Aggregate>& a) {
  if (!a) return nullptr;
  return {{"mean", a->mean}, {"std", a->std}, {"text", a->text}};
}

inline nlohmann::ordered_json summary_json(const CvSummary& s) {
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& m : s.folds) {
    nlohmann::ordered_json j{{"fold", m.fold}, {"n_test", m.n_test}, {"n_pos", m.n_pos}};
    j["auroc"] = m.flagged ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(m.auroc);
    j["auprc"] = m.flagged ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(m.auprc);
    j["flagged"] = m.flagged;
    if (m.flagged) j["error"] = m.error;
    folds.push_back(std::move(j));
  }
  return {{"model", to_string(s.model)},
          {"k", s.k},
          {"baseline", s.baseline},
          {"auroc", aggregate_json(s.auroc)},
          {"auprc", aggregate_json(s.auprc)},
          {"folds", std::move(folds)}};
}

}  // namespace icui

#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "icui/common.hpp"
#include "icui/data_model.hpp"
#include "icui/evaluate.hpp"
#include "icui/impute.hpp"
#include "icui/model_io.hpp"

namespace icui {

enum class Strategy { impute, drop };

/// Everything `run-all` needs. Defaults:
///   preset "dataset2", strategy "drop", model "both", k 5, k_clusters 20,
///   seed 7, output "icui_out", label "icu_death", unstratified folds.
struct ImputeSettings {
  std::string algorithm = "auto";
  std::size_t outer_k = 3;
  std::size_t inner_k = 3;
  std::size_t min_rows = 50;
  std::size_t max_selection_rows = 2000;
  std::size_t max_train_rows = 5000;
  bool fit_on_full = false;  // fit once on the whole dataset instead of per training split
  bool estimate_selection = false;  // extra inner loop; the run's own folds already nest selection
  std::optional<std::string> groups;  // JSON file mapping column -> group
  BoostParams boost{50, 0.1, 3, 1.0, 0.0, 1.0, 1.0, 1.0};
};

struct RunConfig {
  std::string input;
  std::optional<std::string> preset = std::string("dataset2");
  std::optional<std::string> plan;  // plan file; overrides preset
  std::string label = "icu_death";
  Strategy strategy = Strategy::drop;
  std::string model = "both";  // rf | boosted | both
  ForestParams rf;
  BoostParams boosted;
  std::size_t k = 5;
  std::size_t k_clusters = 20;
  std::uint64_t seed = 7;
  bool stratified = false;
  bool write_shap = true;
  std::string output = "icui_out";
  ImputeSettings impute;

  std::vector<ModelKind> models() const {
    if (model == "both") return {ModelKind::rf, ModelKind::boosted};
    return {parse_model_kind(model)};
  }

  void validate() const {
    if (model != "both") parse_model_kind(model);
    if (k < 2) throw ValidationError("k must be at least 2");
    if (k_clusters < 1) throw ValidationError("k_clusters must be at least 1");
    if (impute.algorithm != "auto") parse_impute_algorithm(impute.algorithm);
    if (impute.outer_k < 2 || impute.inner_k < 2)
      throw ValidationError("impute outer_k and inner_k must be at least 2");
    if (preset && *preset != "none") preset_plan(*preset);
  }
};

inline std::string to_string(Strategy s) { return s == Strategy::impute ? "impute" : "drop"; }

inline Strategy parse_strategy(const std::string& s) {
  if (s == "impute") return Strategy::impute;
  if (s == "drop") return Strategy::drop;
  throw ValidationError("unknown strategy '" + s + "' (expected impute or drop)");
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json imp{{"algorithm", c.impute.algorithm},
                             {"outer_k", c.impute.outer_k},
                             {"inner_k", c.impute.inner_k},
                             {"min_rows", c.impute.min_rows},
                             {"max_selection_rows", c.impute.max_selection_rows},
                             {"max_train_rows", c.impute.max_train_rows},
                             {"fit_on_full", c.impute.fit_on_full},
                             {"estimate_selection", c.impute.estimate_selection},
                             {"groups", c.impute.groups ? nlohmann::ordered_json(*c.impute.groups)
                                                        : nlohmann::ordered_json(nullptr)},
                             {"boost", to_json(c.impute.boost)}};
  return {{"input", c.input},
          {"preset", c.preset ? nlohmann::ordered_json(*c.preset) : nlohmann::ordered_json(nullptr)},
          {"plan", c.plan ? nlohmann::ordered_json(*c.plan) : nlohmann::ordered_json(nullptr)},
          {"label", c.label},
          {"strategy", to_string(c.strategy)},
          {"model", c.model},
          {"rf", to_json(c.rf)},
          {"boosted", to_json(c.boosted)},
          {"k", c.k},
          {"k_clusters", c.k_clusters},
          {"seed", c.seed},
          {"stratified", c.stratified},
          {"write_shap", c.write_shap},
          {"output", c.output},
          {"impute", std::move(imp)}};
}

namespace detail {

inline std::optional<std::string> optional_string(const nlohmann::json& j, const char* key,
                                                  std::optional<std::string> fallback) {
  if (!j.contains(key)) return fallback;
  if (j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) throw ValidationError(std::string("'") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  const std::string where = "config";
  detail::reject_unknown_keys(j,
                              {"input", "preset", "plan", "label", "strategy", "model", "rf",
                               "boosted", "k", "k_clusters", "seed", "stratified", "write_shap",
                               "output", "impute"},
                              where);
  detail::read_key(j, "input", c.input, where);
  c.preset = detail::optional_string(j, "preset", c.preset);
  c.plan = detail::optional_string(j, "plan", c.plan);
  detail::read_key(j, "label", c.label, where);
  if (j.contains("strategy")) {
    std::string s;
    detail::read_key(j, "strategy", s, where);
    c.strategy = parse_strategy(s);
  }
  detail::read_key(j, "model", c.model, where);
  if (j.contains("rf")) c.rf = forest_params_from_json(j.at("rf"), c.rf);
  if (j.contains("boosted")) c.boosted = boost_params_from_json(j.at("boosted"), c.boosted);
  detail::read_key(j, "k", c.k, where);
  detail::read_key(j, "k_clusters", c.k_clusters, where);
  detail::read_key(j, "seed", c.seed, where);
  detail::read_key(j, "stratified", c.stratified, where);
  detail::read_key(j, "write_shap", c.write_shap, where);
  detail::read_key(j, "output", c.output, where);
  if (j.contains("impute")) {
    const auto& ij = j.at("impute");
    const std::string iw = "impute config";
    detail::reject_unknown_keys(ij,
                                {"algorithm", "outer_k", "inner_k", "min_rows",
                                 "max_selection_rows", "max_train_rows", "fit_on_full",
                                 "estimate_selection", "groups", "boost"},
                                iw);
    auto& s = c.impute;
    detail::read_key(ij, "algorithm", s.algorithm, iw);
    detail::read_key(ij, "outer_k", s.outer_k, iw);
    detail::read_key(ij, "inner_k", s.inner_k, iw);
    detail::read_key(ij, "min_rows", s.min_rows, iw);
    detail::read_key(ij, "max_selection_rows", s.max_selection_rows, iw);
    detail::read_key(ij, "max_train_rows", s.max_train_rows, iw);
    detail::read_key(ij, "fit_on_full", s.fit_on_full, iw);
    detail::read_key(ij, "estimate_selection", s.estimate_selection, iw);
    s.groups = detail::optional_string(ij, "groups", s.groups);
    if (ij.contains("boost")) s.boost = boost_params_from_json(ij.at("boost"), s.boost);
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config file '" + path + "': " + e.what());
  }
}

inline PreprocessPlan resolve_plan(const RunConfig& c) {
  PreprocessPlan plan;
  if (c.plan) {
    plan = load_plan(*c.plan);
  } else if (c.preset && *c.preset != "none") {
    plan = preset_plan(*c.preset);
  }
  if (!c.plan) plan.label_column = c.label;
  return plan;
}

inline ImputeConfig impute_config(const RunConfig& c, const std::vector<std::string>& names) {
  ImputeConfig ic;
  ic.algorithm = c.impute.algorithm;
  ic.cv.outer_k = c.impute.outer_k;
  ic.cv.inner_k = c.impute.inner_k;
  ic.cv.seed = derive_seed(c.seed, "impute");
  ic.cv.estimate_selection = c.impute.estimate_selection;
  ic.params.min_rows = c.impute.min_rows;
  ic.params.max_train_rows = c.impute.max_train_rows;
  ic.params.boost = c.impute.boost;
  ic.max_selection_rows = c.impute.max_selection_rows;
  if (c.impute.groups) ic.groups = load_groups(*c.impute.groups, names);
  return ic;
}

}  // namespace icui

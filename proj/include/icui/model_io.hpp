#pragma once

#include <fstream>
#include <set>
#include <string>
#include <variant>

#include <json.hpp>

#include "icui/boost.hpp"
#include "icui/common.hpp"
#include "icui/forest.hpp"

namespace icui {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("bad value for '" + std::string(key) + "' in " + where);
  }
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"min_samples_leaf", p.min_samples_leaf},
          {"mtry", p.mtry},
          {"bootstrap", p.bootstrap}};
}

inline ForestParams forest_params_from_json(const nlohmann::json& j, ForestParams p = {}) {
  const std::string where = "rf params";
  detail::reject_unknown_keys(j, {"n_trees", "max_depth", "min_samples_leaf", "mtry", "bootstrap"},
                              where);
  detail::read_key(j, "n_trees", p.n_trees, where);
  detail::read_key(j, "max_depth", p.max_depth, where);
  detail::read_key(j, "min_samples_leaf", p.min_samples_leaf, where);
  detail::read_key(j, "mtry", p.mtry, where);
  detail::read_key(j, "bootstrap", p.bootstrap, where);
  if (p.n_trees < 1) throw ValidationError("n_trees must be >= 1");
  if (p.min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
  if (p.mtry < 0) throw ValidationError("mtry must be >= 0");
  return p;
}

inline nlohmann::ordered_json to_json(const BoostParams& p) {
  return {{"n_rounds", p.n_rounds},
          {"eta", p.eta},
          {"max_depth", p.max_depth},
          {"lambda", p.lambda},
          {"gamma", p.gamma},
          {"min_child_weight", p.min_child_weight},
          {"subsample", p.subsample},
          {"colsample_bytree", p.colsample_bytree}};
}

inline BoostParams boost_params_from_json(const nlohmann::json& j, BoostParams p = {}) {
  const std::string where = "boosted params";
  detail::reject_unknown_keys(j,
                              {"n_rounds", "eta", "max_depth", "lambda", "gamma",
                               "min_child_weight", "subsample", "colsample_bytree"},
                              where);
  detail::read_key(j, "n_rounds", p.n_rounds, where);
  detail::read_key(j, "eta", p.eta, where);
  detail::read_key(j, "max_depth", p.max_depth, where);
  detail::read_key(j, "lambda", p.lambda, where);
  detail::read_key(j, "gamma", p.gamma, where);
  detail::read_key(j, "min_child_weight", p.min_child_weight, where);
  detail::read_key(j, "subsample", p.subsample, where);
  detail::read_key(j, "colsample_bytree", p.colsample_bytree, where);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Model files. Nodes are stored column-wise; doubles survive the round trip
// exactly, so a reloaded model predicts bit-identically.

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json schema_json(const FeatureSchema& s) {
  nlohmann::ordered_json kinds = nlohmann::ordered_json::array();
  for (auto k : s.kinds) kinds.push_back(k == ColumnKind::numeric ? "numeric" : "categorical");
  return {{"names", s.names}, {"kinds", kinds}, {"dictionaries", s.dictionaries}};
}

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema s;
  s.names = j.at("names").get<std::vector<std::string>>();
  for (const auto& k : j.at("kinds")) {
    const auto text = k.get<std::string>();
    if (text != "numeric" && text != "categorical")
      throw ValidationError("model file: unknown feature kind '" + text + "'");
    s.kinds.push_back(text == "numeric" ? ColumnKind::numeric : ColumnKind::categorical);
  }
  s.dictionaries = j.at("dictionaries").get<std::vector<std::vector<std::string>>>();
  if (s.kinds.size() != s.names.size() || s.dictionaries.size() != s.names.size())
    throw ValidationError("model file: inconsistent feature schema");
  return s;
}

inline nlohmann::ordered_json tree_json(const DecisionTree& t) {
  nlohmann::ordered_json feature = nlohmann::ordered_json::array(), kind = feature,
                         threshold = feature, left = feature, right = feature, n = feature,
                         value = feature, counts = feature, impurity = feature, decrease = feature,
                         gain = feature, hessian = feature;
  for (const auto& node : t.nodes) {
    feature.push_back(node.feature);
    kind.push_back(node.kind == ColumnKind::numeric ? 0 : 1);
    threshold.push_back(node.threshold);
    left.push_back(node.left);
    right.push_back(node.right);
    n.push_back(node.n_samples);
    value.push_back(node.value);
    counts.push_back({node.class_counts[0], node.class_counts[1]});
    impurity.push_back(node.impurity);
    decrease.push_back(node.impurity_decrease);
    gain.push_back(node.gain);
    hessian.push_back(node.hessian);
  }
  return {{"feature", feature},     {"kind", kind},       {"threshold", threshold},
          {"left", left},           {"right", right},     {"n_samples", n},
          {"value", value},         {"class_counts", counts}, {"impurity", impurity},
          {"impurity_decrease", decrease}, {"gain", gain}, {"hessian", hessian}};
}

inline DecisionTree tree_from_json(const nlohmann::json& j, std::size_t n_features) {
  const auto& feature = j.at("feature");
  const std::size_t n = feature.size();
  DecisionTree t;
  t.nodes.resize(n);
  auto column = [&](const char* key) -> const nlohmann::json& {
    const auto& c = j.at(key);
    if (!c.is_array() || c.size() != n)
      throw ValidationError(std::string("model file: node array '") + key + "' has wrong length");
    return c;
  };
  const auto &kind = column("kind"), &thr = column("threshold"), &left = column("left"),
             &right = column("right"), &ns = column("n_samples"), &value = column("value"),
             &counts = column("class_counts"), &imp = column("impurity"),
             &dec = column("impurity_decrease"), &gain = column("gain"),
             &hess = column("hessian");
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode& node = t.nodes[i];
    node.feature = feature[i].get<std::int32_t>();
    node.kind = kind[i].get<int>() == 0 ? ColumnKind::numeric : ColumnKind::categorical;
    node.threshold = thr[i].get<double>();
    node.left = left[i].get<std::int32_t>();
    node.right = right[i].get<std::int32_t>();
    node.n_samples = ns[i].get<std::int64_t>();
    node.value = value[i].get<double>();
    node.class_counts = {counts[i].at(0).get<std::int64_t>(), counts[i].at(1).get<std::int64_t>()};
    node.impurity = imp[i].get<double>();
    node.impurity_decrease = dec[i].get<double>();
    node.gain = gain[i].get<double>();
    node.hessian = hess[i].get<double>();
  }
  // Children must point forward so traversal always terminates.
  for (std::size_t i = 0; i < n; ++i) {
    const TreeNode& node = t.nodes[i];
    if (node.is_leaf()) continue;
    const auto in_range = [&](std::int32_t c) {
      return c > static_cast<std::int32_t>(i) && c < static_cast<std::int32_t>(n);
    };
    if (!in_range(node.left) || !in_range(node.right) ||
        node.feature >= static_cast<std::int32_t>(n_features))
      throw ValidationError("model file: malformed tree node " + std::to_string(i));
  }
  if (n == 0) throw ValidationError("model file: empty tree");
  return t;
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const ForestModel& m) {
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& t : m.trees) trees.push_back(detail::tree_json(t));
  return {{"format", "icui-model"},
          {"version", kModelFormatVersion},
          {"kind", "rf"},
          {"n_features", m.n_features},
          {"seed", m.seed},
          {"params", to_json(m.params)},
          {"schema", detail::schema_json(m.schema)},
          {"trees", std::move(trees)}};
}

inline nlohmann::ordered_json model_to_json(const BoostedModel& m) {
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& t : m.trees) trees.push_back(detail::tree_json(t));
  return {{"format", "icui-model"},
          {"version", kModelFormatVersion},
          {"kind", "boosted"},
          {"n_features", m.n_features},
          {"seed", m.seed},
          {"params", to_json(m.params)},
          {"objective", m.objective == Objective::logistic ? "logistic" : "squared"},
          {"base_score", m.base_score},
          {"train_loss", m.train_loss},
          {"schema", detail::schema_json(m.schema)},
          {"trees", std::move(trees)}};
}

using AnyModel = std::variant<ForestModel, BoostedModel>;

inline AnyModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "icui-model") throw ValidationError("not an icui model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw ValidationError("unsupported model file version " + std::to_string(version));
    const std::string kind = j.at("kind").get<std::string>();
    const auto n_features = j.at("n_features").get<std::size_t>();
    FeatureSchema schema = detail::schema_from_json(j.at("schema"));
    if (schema.size() != n_features) throw ValidationError("model file: schema size mismatch");
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(detail::tree_from_json(t, n_features));
    if (kind == "rf") {
      ForestModel m;
      m.params = forest_params_from_json(j.at("params"));
      m.n_features = n_features;
      m.seed = j.at("seed").get<std::uint64_t>();
      m.schema = std::move(schema);
      m.trees = std::move(trees);
      return m;
    }
    if (kind == "boosted") {
      BoostedModel m;
      m.params = boost_params_from_json(j.at("params"));
      m.n_features = n_features;
      m.seed = j.at("seed").get<std::uint64_t>();
      m.objective = j.at("objective").get<std::string>() == "squared" ? Objective::squared
                                                                        : Objective::logistic;
      m.base_score = j.at("base_score").get<double>();
      m.train_loss = j.value("train_loss", std::vector<double>{});
      m.schema = std::move(schema);
      m.trees = std::move(trees);
      return m;
    }
    throw ValidationError("model file: unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model file: ") + e.what());
  }
}

inline void save_model(const std::string& path, const AnyModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  std::visit([&](const auto& m) { out << model_to_json(m).dump() << '\n'; }, model);
}

inline AnyModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("model file '" + path + "': " + e.what());
  }
}

}  // namespace icui

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "icui/boost.hpp"
#include "icui/common.hpp"
#include "icui/data_model.hpp"

namespace icui {

enum class ImputeAlgorithm : int { A0 = 0, A1 = 1, A2 = 2, A3 = 3 };

inline std::string to_string(ImputeAlgorithm a) { return "A" + std::to_string(static_cast<int>(a)); }

inline ImputeAlgorithm parse_impute_algorithm(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == "A" + std::to_string(i)) return static_cast<ImputeAlgorithm>(i);
  throw ValidationError("unknown imputation algorithm '" + s + "' (expected A0..A3 or auto)");
}

/// Columns measuring the same quantity (e.g. a daily min and max) share a group.
struct VariableTypeGroups {
  std::map<std::string, std::string> group_of_column;

  std::string group_of(const std::string& column) const {
    auto it = group_of_column.find(column);
    return it == group_of_column.end() ? column : it->second;
  }
};

/// Groups by name with the suffixes _min, _max, _avg and _diff stripped.
inline VariableTypeGroups derive_groups(const std::vector<std::string>& names) {
  VariableTypeGroups g;
  for (const auto& name : names) {
    std::string base = name;
    for (const char* suffix : {"_min", "_max", "_avg", "_diff"}) {
      const std::string s(suffix);
      if (base.size() > s.size() && base.compare(base.size() - s.size(), s.size(), s) == 0) {
        base.resize(base.size() - s.size());
        break;
      }
    }
    g.group_of_column[name] = base;
  }
  return g;
}

/// Derived groups overridden by a JSON object {"column": "group", ...}.
inline VariableTypeGroups groups_from_json(const nlohmann::json& j,
                                           const std::vector<std::string>& names) {
  VariableTypeGroups g = derive_groups(names);
  if (!j.is_object()) throw ValidationError("group file must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string())
      throw ValidationError("group of '" + it.key() + "' must be a string");
    g.group_of_column[it.key()] = it.value().get<std::string>();
  }
  return g;
}

inline VariableTypeGroups load_groups(const std::string& path,
                                      const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open group file '" + path + "'");
  try {
    return groups_from_json(nlohmann::json::parse(in), names);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("group file '" + path + "': " + e.what());
  }
}

struct ImputeParams {
  std::size_t min_rows = 50;
  BoostParams boost{50, 0.1, 3, 1.0, 0.0, 1.0, 1.0, 1.0};
  std::size_t max_train_rows = 5000;  // 0: no cap
};

/// Median (lower middle on even counts) or mode (lowest code on ties) of the
/// observed cells among `rows`.
inline std::optional<double> fallback_value(const Column& col, std::span<const std::size_t> rows) {
  if (col.is_numeric()) {
    std::vector<double> v;
    for (auto r : rows)
      if (!col.missing[r]) v.push_back(col.numeric[r]);
    if (v.empty()) return std::nullopt;
    const std::size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
  }
  std::vector<std::size_t> count(col.dictionary.size(), 0);
  bool any = false;
  for (auto r : rows)
    if (!col.missing[r]) {
      ++count[col.codes[r]];
      any = true;
    }
  if (!any) return std::nullopt;
  return static_cast<double>(std::max_element(count.begin(), count.end()) - count.begin());
}

inline std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.n_rows);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

/// Boosted model predicting one column from others. Missing predictor cells
/// are filled with that predictor's median/mode before training and
/// prediction.
struct ColumnPredictor {
  std::string target;
  ColumnKind target_kind = ColumnKind::numeric;
  std::vector<std::string> features;
  std::vector<double> input_fill;
  BoostedModel regressor;                     // numeric target
  std::vector<std::int32_t> class_codes;      // categorical: one classifier per code
  std::vector<BoostedModel> classifiers;
  std::optional<std::int32_t> constant_code;  // categorical with a single observed code

  FeatureMatrix inputs(const Dataset& ds, std::span<const std::size_t> rows) const {
    FeatureMatrix m;
    m.n_rows = rows.size();
    m.n_features = features.size();
    m.values.resize(m.n_rows * m.n_features);
    for (std::size_t f = 0; f < features.size(); ++f) {
      const Column& col = ds.column(features[f]);
      m.names.push_back(features[f]);
      m.kinds.push_back(col.spec.kind);
      m.n_categories.push_back(col.is_numeric() ? 0 : static_cast<std::int32_t>(col.dictionary.size()));
      for (std::size_t i = 0; i < rows.size(); ++i)
        m.values[i * m.n_features + f] = col.missing[rows[i]] ? input_fill[f] : col.value(rows[i]);
    }
    return m;
  }

  /// Predicted cell values (category codes as doubles) for `rows`.
  std::vector<double> predict(const Dataset& ds, std::span<const std::size_t> rows) const {
    if (target_kind == ColumnKind::categorical && constant_code)
      return std::vector<double>(rows.size(), static_cast<double>(*constant_code));
    const FeatureMatrix x = inputs(ds, rows);
    if (target_kind == ColumnKind::numeric) return predict_margin(regressor, x);
    std::vector<double> best_p(rows.size(), -1.0), best_code(rows.size(), 0.0);
    for (std::size_t c = 0; c < classifiers.size(); ++c) {
      const auto p = predict_proba_boosted(classifiers[c], x);
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (p[i] > best_p[i]) {
          best_p[i] = p[i];
          best_code[i] = class_codes[c];
        }
    }
    return best_code;
  }
};

struct FitOutcome {
  std::optional<ColumnPredictor> predictor;  // empty: fall back to A0
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::size_t> observed_rows(const Column& col, std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  for (auto r : rows)
    if (!col.missing[r]) out.push_back(r);
  return out;
}

inline FitOutcome fit_predictor(const Dataset& ds, const std::string& target,
                                std::vector<std::string> features, const ImputeParams& params,
                                std::span<const std::size_t> rows, std::uint64_t seed) {
  FitOutcome out;
  const Column& tcol = ds.column(target);
  if (features.empty()) {
    out.warnings.push_back(target + ": no predictor columns left, falling back to A0");
    return out;
  }
  std::vector<std::size_t> train = observed_rows(tcol, rows);
  if (train.size() < params.min_rows) {
    out.warnings.push_back(target + ": " + std::to_string(train.size()) +
                           " complete cases < min_rows " + std::to_string(params.min_rows) +
                           ", falling back to A0");
    return out;
  }
  if (params.max_train_rows > 0 && train.size() > params.max_train_rows) {
    Rng rng = make_rng(seed, "impute-subsample");
    std::shuffle(train.begin(), train.end(), rng);
    train.resize(params.max_train_rows);
    std::sort(train.begin(), train.end());
  }

  ColumnPredictor p;
  p.target = target;
  p.target_kind = tcol.spec.kind;
  p.features = std::move(features);
  for (const auto& f : p.features) {
    auto fill = fallback_value(ds.column(f), train);
    p.input_fill.push_back(fill.value_or(0.0));
  }
  const FeatureMatrix x = p.inputs(ds, train);
  if (tcol.is_numeric()) {
    std::vector<double> y;
    y.reserve(train.size());
    for (auto r : train) y.push_back(tcol.numeric[r]);
    p.regressor = fit_newton(x, y, Objective::squared, params.boost, seed);
  } else {
    std::vector<std::size_t> count(tcol.dictionary.size(), 0);
    for (auto r : train) ++count[tcol.codes[r]];
    const auto present = std::count_if(count.begin(), count.end(), [](auto c) { return c > 0; });
    if (present <= 1) {
      p.constant_code = static_cast<std::int32_t>(
          std::max_element(count.begin(), count.end()) - count.begin());
    } else {
      for (std::size_t c = 0; c < count.size(); ++c) {
        if (count[c] == 0) continue;
        std::vector<double> y;
        y.reserve(train.size());
        for (auto r : train) y.push_back(tcol.codes[r] == static_cast<std::int32_t>(c) ? 1.0 : 0.0);
        p.class_codes.push_back(static_cast<std::int32_t>(c));
        p.classifiers.push_back(fit_newton(x, y, Objective::logistic, params.boost,
                                           derive_seed(seed, "ovr", c)));
      }
    }
  }
  out.predictor = std::move(p);
  return out;
}

}  // namespace detail

inline std::vector<std::string> algorithm1_features(const Dataset& ds, const std::string& target) {
  std::vector<std::string> out;
  for (const auto& c : ds.columns)
    if (c.spec.name != target) out.push_back(c.spec.name);
  return out;
}

inline std::vector<std::string> algorithm2_features(const Dataset& ds, const std::string& target,
                                                    const VariableTypeGroups& groups) {
  const std::string g = groups.group_of(target);
  std::vector<std::string> out;
  for (const auto& c : ds.columns)
    if (c.spec.name != target && groups.group_of(c.spec.name) != g) out.push_back(c.spec.name);
  return out;
}

/// Other columns sharing the target's group.
inline std::vector<std::string> group_siblings(const Dataset& ds, const std::string& target,
                                               const VariableTypeGroups& groups) {
  const std::string g = groups.group_of(target);
  std::vector<std::string> out;
  for (const auto& c : ds.columns)
    if (c.spec.name != target && groups.group_of(c.spec.name) == g) out.push_back(c.spec.name);
  return out;
}

inline FitOutcome fit_algorithm1(const Dataset& ds, const std::string& target,
                                 const ImputeParams& params, std::uint64_t seed = 0) {
  const auto rows = all_rows(ds);
  return detail::fit_predictor(ds, target, algorithm1_features(ds, target), params, rows, seed);
}

inline FitOutcome fit_algorithm2(const Dataset& ds, const std::string& target,
                                 const VariableTypeGroups& groups, const ImputeParams& params,
                                 std::uint64_t seed = 0) {
  const auto rows = all_rows(ds);
  return detail::fit_predictor(ds, target, algorithm2_features(ds, target, groups), params, rows,
                               seed);
}

struct ImputerEntry {
  ImputeAlgorithm algorithm = ImputeAlgorithm::A0;
  double fallback_value = 0.0;
  std::optional<ColumnPredictor> a1;
  std::optional<ColumnPredictor> a2;
  std::vector<std::string> siblings;  // same-group columns, for A3 routing
};

struct ImputationModel {
  std::map<std::string, ImputerEntry> entries;
  std::vector<std::string> warnings;
};

struct RoutedImputation {
  std::vector<double> values;       // one per requested row
  std::vector<std::uint8_t> used_a2;
};

/// Per-row predictions under an entry's algorithm. A3 sends rows that also
/// miss a same-group sibling to the A2 predictor and every other row to A1.
inline RoutedImputation predict_entry(const Dataset& ds, const ImputerEntry& e,
                                      std::span<const std::size_t> rows) {
  RoutedImputation out;
  out.values.assign(rows.size(), e.fallback_value);
  out.used_a2.assign(rows.size(), 0);
  auto fill_from = [&](const std::optional<ColumnPredictor>& p, std::span<const std::size_t> rs,
                       std::span<const std::size_t> positions) {
    if (!p || rs.empty()) return;
    const auto v = p->predict(ds, rs);
    for (std::size_t i = 0; i < rs.size(); ++i)
      if (std::isfinite(v[i])) out.values[positions[i]] = v[i];
  };
  std::vector<std::size_t> positions(rows.size());
  std::iota(positions.begin(), positions.end(), 0);
  switch (e.algorithm) {
    case ImputeAlgorithm::A0:
      break;
    case ImputeAlgorithm::A1:
      fill_from(e.a1, rows, positions);
      break;
    case ImputeAlgorithm::A2:
      fill_from(e.a2, rows, positions);
      std::fill(out.used_a2.begin(), out.used_a2.end(), 1);
      break;
    case ImputeAlgorithm::A3: {
      std::vector<std::size_t> r1, p1, r2, p2;
      std::vector<const Column*> sib;
      for (const auto& s : e.siblings) sib.push_back(&ds.column(s));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        bool sibling_missing = false;
        for (const Column* s : sib) sibling_missing |= s->missing[rows[i]] != 0;
        if (sibling_missing) {
          r2.push_back(rows[i]);
          p2.push_back(i);
          out.used_a2[i] = 1;
        } else {
          r1.push_back(rows[i]);
          p1.push_back(i);
        }
      }
      fill_from(e.a1, r1, p1);
      fill_from(e.a2, r2, p2);
      break;
    }
  }
  return out;
}

/// Fits A0 fallbacks for every column.
inline ImputationModel fit_algorithm0(const Dataset& ds) {
  ImputationModel m;
  const auto rows = all_rows(ds);
  for (const auto& c : ds.columns) {
    auto v = fallback_value(c, rows);
    if (!v) throw ValidationError("column '" + c.spec.name + "' has no observed values");
    m.entries[c.spec.name].fallback_value = *v;
  }
  return m;
}

/// Fits A1 and A2 on the whole dataset and routes every row through A3.
inline RoutedImputation apply_algorithm3(const Dataset& ds, const std::string& target,
                                         const VariableTypeGroups& groups,
                                         const ImputeParams& params, std::uint64_t seed = 0) {
  ImputerEntry e;
  e.algorithm = ImputeAlgorithm::A3;
  const auto rows = all_rows(ds);
  auto fb = fallback_value(ds.column(target), rows);
  if (!fb) throw ValidationError("column '" + target + "' has no observed values");
  e.fallback_value = *fb;
  e.a1 = fit_algorithm1(ds, target, params, seed).predictor;
  e.a2 = fit_algorithm2(ds, target, groups, params, seed).predictor;
  e.siblings = group_siblings(ds, target, groups);
  return predict_entry(ds, e, rows);
}

struct NestedCvConfig {
  std::size_t outer_k = 3;
  std::size_t inner_k = 3;
  std::uint64_t seed = 0;
  bool estimate_selection = true;  // run the inner loop that scores the selection rule itself
};

struct AlgorithmScore {
  ImputeAlgorithm algorithm = ImputeAlgorithm::A0;
  std::string metric;  // "mse" (lower wins) or "accuracy" (higher wins)
  double mean_score = 0.0;
};

struct ImputerSelection {
  std::string column;
  ImputeAlgorithm chosen = ImputeAlgorithm::A0;
  std::vector<AlgorithmScore> scores;  // A0..A3 on the selection CV
  double nested_score = std::nan("");  // outer-fold score of the selection procedure
  std::vector<std::string> warnings;
};

namespace detail {

inline ImputerEntry fit_entry(const Dataset& ds, const std::string& target,
                              const VariableTypeGroups& groups, const ImputeParams& params,
                              std::span<const std::size_t> rows, std::uint64_t seed,
                              bool need_a1, bool need_a2, std::vector<std::string>* warnings) {
  ImputerEntry e;
  e.fallback_value = fallback_value(ds.column(target), rows).value_or(0.0);
  e.siblings = group_siblings(ds, target, groups);
  auto collect = [&](FitOutcome&& o) {
    if (warnings) warnings->insert(warnings->end(), o.warnings.begin(), o.warnings.end());
    return std::move(o.predictor);
  };
  if (need_a1)
    e.a1 = collect(fit_predictor(ds, target, algorithm1_features(ds, target), params, rows, seed));
  if (need_a2)
    e.a2 = collect(
        fit_predictor(ds, target, algorithm2_features(ds, target, groups), params, rows, seed));
  return e;
}

inline double score_predictions(const Column& col, std::span<const std::size_t> rows,
                                std::span<const double> pred) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (col.is_numeric()) {
      const double d = pred[i] - col.numeric[rows[i]];
      total += d * d;
    } else {
      total += static_cast<double>(pred[i]) == static_cast<double>(col.codes[rows[i]]) ? 1.0 : 0.0;
    }
  }
  return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
}

/// k-fold CV of all four algorithms on `rows` (all observed for the target).
inline std::array<double, 4> cv_scores(const Dataset& ds, const std::string& target,
                                       const VariableTypeGroups& groups,
                                       const ImputeParams& params,
                                       std::span<const std::size_t> rows, std::size_t k,
                                       std::uint64_t seed, std::vector<std::string>* warnings) {
  const Column& col = ds.column(target);
  const auto folds = split_folds(rows.size(), k, seed);
  std::array<double, 4> sum{0, 0, 0, 0};
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < rows.size(); ++i)
      (folds.fold_of_row[i] == f ? test : train).push_back(rows[i]);
    ImputerEntry e =
        fit_entry(ds, target, groups, params, train, derive_seed(seed, "fold", f), true, true,
                  warnings);
    for (int a = 0; a < 4; ++a) {
      e.algorithm = static_cast<ImputeAlgorithm>(a);
      const auto pred = predict_entry(ds, e, test).values;
      sum[a] += score_predictions(col, test, pred);
    }
  }
  for (double& s : sum) s /= static_cast<double>(k);
  return sum;
}

inline ImputeAlgorithm best_algorithm(const std::array<double, 4>& scores, bool higher_wins) {
  int best = 0;
  for (int a = 1; a < 4; ++a)
    if (higher_wins ? scores[a] > scores[best] : scores[a] < scores[best]) best = a;
  return static_cast<ImputeAlgorithm>(best);
}

}  // namespace detail

/// Chooses an imputation algorithm for one column using complete cases only.
/// Every algorithm is scored by outer_k-fold CV over the complete cases (MSE
/// for numeric targets, accuracy for categorical) and the best mean wins, ties
/// to the lower id. With estimate_selection the choice is repeated by an
/// inner_k-fold CV inside each outer training split and the picked algorithm
/// is scored on the held-out split, giving `nested_score`.
inline ImputerSelection select_imputer(const Dataset& ds, const std::string& target,
                                       const VariableTypeGroups& groups,
                                       const NestedCvConfig& cfg, const ImputeParams& params,
                                       std::size_t max_rows = 0) {
  ImputerSelection sel;
  sel.column = target;
  const Column& col = ds.column(target);
  const bool higher_wins = !col.is_numeric();
  const std::string metric = col.is_numeric() ? "mse" : "accuracy";
  const std::uint64_t seed = derive_seed(cfg.seed, target);
  auto rows = detail::observed_rows(col, all_rows(ds));
  if (max_rows > 0 && rows.size() > max_rows) {
    Rng rng = make_rng(seed, "select-subsample");
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(max_rows);
    std::sort(rows.begin(), rows.end());
  }
  if (cfg.outer_k < 2 || cfg.inner_k < 2)
    throw ValidationError("nested CV needs outer_k >= 2 and inner_k >= 2");
  if (rows.size() < cfg.outer_k * cfg.inner_k) {
    sel.warnings.push_back(target + ": " + std::to_string(rows.size()) +
                           " complete cases are too few for nested CV, choosing A0");
    for (int a = 0; a < 4; ++a)
      sel.scores.push_back({static_cast<ImputeAlgorithm>(a), metric, std::nan("")});
    return sel;
  }

  const auto outer = split_folds(rows.size(), cfg.outer_k, derive_seed(seed, "outer"));
  std::array<double, 4> sum{0, 0, 0, 0};
  double nested = 0.0;
  for (std::size_t o = 0; o < cfg.outer_k; ++o) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < rows.size(); ++i)
      (outer.fold_of_row[i] == o ? test : train).push_back(rows[i]);
    ImputerEntry e = detail::fit_entry(ds, target, groups, params, train,
                                       derive_seed(seed, "outer-fit", o), true, true,
                                       &sel.warnings);
    std::array<double, 4> fold_score{};
    for (int a = 0; a < 4; ++a) {
      e.algorithm = static_cast<ImputeAlgorithm>(a);
      fold_score[a] = detail::score_predictions(col, test, predict_entry(ds, e, test).values);
      sum[a] += fold_score[a];
    }
    if (cfg.estimate_selection) {
      const auto inner = detail::cv_scores(ds, target, groups, params, train, cfg.inner_k,
                                           derive_seed(seed, "inner", o), nullptr);
      nested += fold_score[static_cast<int>(detail::best_algorithm(inner, higher_wins))];
    }
  }
  for (double& v : sum) v /= static_cast<double>(cfg.outer_k);
  sel.chosen = detail::best_algorithm(sum, higher_wins);
  for (int a = 0; a < 4; ++a)
    sel.scores.push_back({static_cast<ImputeAlgorithm>(a), metric, sum[a]});
  if (cfg.estimate_selection) sel.nested_score = nested / static_cast<double>(cfg.outer_k);
  return sel;
}

struct ImputeConfig {
  std::string algorithm = "auto";  // auto | A0 | A1 | A2 | A3
  NestedCvConfig cv;
  ImputeParams params;
  std::size_t max_selection_rows = 2000;
  std::optional<VariableTypeGroups> groups;  // default: derived from names
};

struct FittedImputation {
  ImputationModel model;
  std::vector<ImputerSelection> selections;
};

/// Fits an entry for every column; columns with missing cells get their
/// algorithm chosen (or forced) and its predictors trained on complete cases.
/// Columns are fitted independently with seeds from (seed, column name).
inline FittedImputation fit_imputation(const Dataset& ds, const ImputeConfig& cfg) {
  const VariableTypeGroups groups = cfg.groups ? *cfg.groups : derive_groups(ds.column_names());
  FittedImputation out;
  out.model = fit_algorithm0(ds);

  std::vector<std::string> targets;
  for (const auto& c : ds.columns)
    if (c.missing_count() > 0) targets.push_back(c.spec.name);
  std::vector<ImputerEntry> entries(targets.size());
  std::vector<std::optional<ImputerSelection>> selections(targets.size());
  std::vector<std::vector<std::string>> warnings(targets.size());
  const auto rows = all_rows(ds);
  parallel_for(targets.size(), [&](std::size_t i) {
    const std::string& t = targets[i];
    ImputeAlgorithm algo;
    if (cfg.algorithm == "auto") {
      selections[i] = select_imputer(ds, t, groups, cfg.cv, cfg.params, cfg.max_selection_rows);
      algo = selections[i]->chosen;
      warnings[i] = selections[i]->warnings;
    } else {
      algo = parse_impute_algorithm(cfg.algorithm);
    }
    const bool a1 = algo == ImputeAlgorithm::A1 || algo == ImputeAlgorithm::A3;
    const bool a2 = algo == ImputeAlgorithm::A2 || algo == ImputeAlgorithm::A3;
    entries[i] = detail::fit_entry(ds, t, groups, cfg.params, rows, derive_seed(cfg.cv.seed, t),
                                   a1, a2, &warnings[i]);
    entries[i].algorithm = algo;
  });
  for (std::size_t i = 0; i < targets.size(); ++i) {
    entries[i].fallback_value = out.model.entries[targets[i]].fallback_value;
    out.model.entries[targets[i]] = std::move(entries[i]);
    if (selections[i]) out.selections.push_back(std::move(*selections[i]));
    out.model.warnings.insert(out.model.warnings.end(), warnings[i].begin(), warnings[i].end());
  }
  return out;
}

/// Fills every missing cell; observed cells are copied untouched.
inline Dataset impute(const Dataset& ds, const ImputationModel& model) {
  Dataset out = ds;
  for (std::size_t c = 0; c < ds.columns.size(); ++c) {
    const Column& src = ds.columns[c];
    if (src.missing_count() == 0) continue;
    auto it = model.entries.find(src.spec.name);
    if (it == model.entries.end())
      throw ValidationError("imputation model does not cover column '" + src.spec.name + "'");
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < ds.n_rows; ++r)
      if (src.missing[r]) rows.push_back(r);
    const auto pred = predict_entry(ds, it->second, rows);
    Column& dst = out.columns[c];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t r = rows[i];
      double v = pred.values[i];
      if (!std::isfinite(v)) v = it->second.fallback_value;
      if (dst.is_numeric()) {
        dst.numeric[r] = v;
      } else {
        auto code = static_cast<std::int32_t>(v);
        if (code < 0 || code >= static_cast<std::int32_t>(dst.dictionary.size()))
          code = static_cast<std::int32_t>(it->second.fallback_value);
        dst.codes[r] = code;
      }
      dst.missing[r] = 0;
    }
  }
  return out;
}

inline void write_score_table(std::ostream& os, const std::vector<ImputerSelection>& selections) {
  csv::write_row(os, {"column", "algorithm", "metric", "mean_score", "chosen"});
  for (const auto& s : selections) {
    for (const auto& sc : s.scores)
      csv::write_row(os, {s.column, to_string(sc.algorithm), sc.metric,
                          std::isnan(sc.mean_score) ? "" : format_double(sc.mean_score),
                          sc.algorithm == s.chosen ? "1" : "0"});
    if (!std::isnan(s.nested_score))
      csv::write_row(os, {s.column, "nested", s.scores.front().metric,
                          format_double(s.nested_score), ""});
  }
}

}  // namespace icui

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "icui/common.hpp"
#include "icui/data_model.hpp"
#include "icui/tree.hpp"

namespace icui {

using ClassCounts = std::array<std::int64_t, 2>;

/// Gini impurity 1 - sum_k p_k^2 of a binary class histogram.
inline double gini(const ClassCounts& counts) {
  if (counts[0] < 0 || counts[1] < 0) throw ValidationError("gini: negative class count");
  const double total = static_cast<double>(counts[0] + counts[1]);
  if (total == 0) throw ValidationError("gini: empty node");
  const double p0 = counts[0] / total, p1 = counts[1] / total;
  return 1.0 - (p0 * p0 + p1 * p1);
}

/// Parent impurity minus the sample-weighted mean of the child impurities.
inline double impurity_decrease(const ClassCounts& parent, const ClassCounts& left,
                                const ClassCounts& right) {
  if (left[0] + right[0] != parent[0] || left[1] + right[1] != parent[1])
    throw ValidationError("impurity_decrease: child counts do not sum to the parent");
  const std::int64_t nl = left[0] + left[1], nr = right[0] + right[1];
  if (nl == 0 || nr == 0) throw ValidationError("impurity_decrease: empty child");
  const double n = static_cast<double>(nl + nr);
  return gini(parent) - (nl / n * gini(left) + nr / n * gini(right));
}

struct ForestParams {
  int n_trees = 300;
  int max_depth = -1;  // negative: unbounded
  int min_samples_leaf = 5;
  int mtry = 0;  // 0: ceil(sqrt(n_features))
  bool bootstrap = true;
};

struct SplitCandidate {
  std::size_t feature = 0;
  ColumnKind kind = ColumnKind::numeric;
  double threshold = 0.0;
  ClassCounts left{0, 0};
  ClassCounts right{0, 0};
  double impurity_decrease = 0.0;
};

namespace detail {

__extension__ typedef __int128 i128;

// Children score sL/nL + sR/nR (s = sum of squared class counts) kept as an
// exact fraction; maximizing it maximizes the impurity decrease.
struct SplitScore {
  i128 num = 0;
  i128 den = 1;
};

inline SplitScore split_score(const ClassCounts& l, const ClassCounts& r) {
  const i128 nl = l[0] + l[1], nr = r[0] + r[1];
  const i128 sl = static_cast<i128>(l[0]) * l[0] + static_cast<i128>(l[1]) * l[1];
  const i128 sr = static_cast<i128>(r[0]) * r[0] + static_cast<i128>(r[1]) * r[1];
  return {sl * nr + sr * nl, nl * nr};
}

inline bool better(const SplitScore& a, const SplitScore& b) {
  return a.num * b.den > b.num * a.den;
}

inline bool positive_gain(const SplitScore& s, const ClassCounts& parent) {
  const i128 n = parent[0] + parent[1];
  const i128 sp = static_cast<i128>(parent[0]) * parent[0] +
                  static_cast<i128>(parent[1]) * parent[1];
  return s.num * n > sp * s.den;
}

inline double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return (mid >= hi) ? lo : mid;
}

}  // namespace detail

/// Dense per-feature value ranks (equal values share a rank), so node-level
/// sorting works on integers.
struct FeatureRanks {
  std::vector<std::vector<std::uint32_t>> rank;         // [feature][row]
  std::vector<std::vector<double>> value_of_rank;        // [feature][rank]
};

inline FeatureRanks rank_features(const FeatureMatrix& x) {
  FeatureRanks fr;
  fr.rank.resize(x.n_features);
  fr.value_of_rank.resize(x.n_features);
  parallel_for(x.n_features, [&](std::size_t f) {
    if (x.kinds[f] != ColumnKind::numeric) return;
    std::vector<std::uint32_t> order(x.n_rows);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x.at(a, f) < x.at(b, f);
    });
    auto& rank = fr.rank[f];
    auto& vals = fr.value_of_rank[f];
    rank.resize(x.n_rows);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const double v = x.at(order[i], f);
      if (vals.empty() || v != vals.back()) vals.push_back(v);
      rank[order[i]] = static_cast<std::uint32_t>(vals.size() - 1);
    }
  });
  return fr;
}

namespace detail {

/// LSD radix sort on 11-bit digits, skipping digits above `max_key`.
inline void radix_sort(std::vector<std::uint64_t>& keys, std::vector<std::uint64_t>& scratch,
                       std::uint64_t max_key) {
  if (keys.size() < 256) {
    std::sort(keys.begin(), keys.end());
    return;
  }
  scratch.resize(keys.size());
  for (int shift = 0; shift < 64 && (max_key >> shift) != 0; shift += 11) {
    std::size_t count[2049] = {};
    for (auto k : keys) ++count[((k >> shift) & 2047u) + 1];
    for (std::size_t i = 1; i < 2049; ++i) count[i] += count[i - 1];
    for (auto k : keys) scratch[count[(k >> shift) & 2047u]++] = k;
    keys.swap(scratch);
  }
}

}  // namespace detail

/// Exhaustive split search over `features` for the rows of one node (rows may
/// repeat under bootstrap). Numeric thresholds sit at midpoints between
/// consecutive distinct values; categorical splits isolate one present code.
/// Ties go to the lower feature index, then the lower threshold or code.
/// `ranks`, when given, must come from rank_features(x).
inline std::optional<SplitCandidate> best_split(std::span<const std::size_t> rows,
                                                std::span<const std::size_t> features,
                                                const FeatureMatrix& x,
                                                std::span<const std::uint8_t> labels,
                                                int min_samples_leaf = 1,
                                                const FeatureRanks* ranks = nullptr) {
  const std::int64_t msl = std::max(1, min_samples_leaf);
  const std::int64_t n = static_cast<std::int64_t>(rows.size());
  if (n < 2 * msl) return std::nullopt;
  ClassCounts parent{0, 0};
  for (auto r : rows) ++parent[labels[r]];
  if (parent[0] == 0 || parent[1] == 0) return std::nullopt;

  std::optional<SplitCandidate> best;
  detail::SplitScore best_score{};
  FeatureRanks local;
  std::vector<std::uint64_t> keys, scratch;
  keys.reserve(rows.size());

  for (std::size_t f : features) {
    if (x.kinds[f] == ColumnKind::numeric) {
      if (!ranks) {
        // Rank only this node's values.
        std::vector<double> v;
        v.reserve(rows.size());
        for (auto r : rows) v.push_back(x.at(r, f));
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        local.value_of_rank.assign(1, std::move(v));
      }
      const auto& vals = ranks ? ranks->value_of_rank[f] : local.value_of_rank[0];
      keys.clear();
      for (auto r : rows) {
        const std::uint64_t rk =
            ranks ? ranks->rank[f][r]
                  : static_cast<std::uint64_t>(
                        std::lower_bound(vals.begin(), vals.end(), x.at(r, f)) - vals.begin());
        keys.push_back((rk << 1) | labels[r]);
      }
      detail::radix_sort(keys, scratch, (static_cast<std::uint64_t>(vals.size()) << 1) | 1u);
      ClassCounts left{0, 0};
      for (std::int64_t i = 0; i + 1 < n; ++i) {
        ++left[keys[i] & 1u];
        const std::uint64_t here = keys[i] >> 1, next = keys[i + 1] >> 1;
        if (here == next) continue;
        const std::int64_t nl = i + 1;
        if (nl < msl) continue;
        if (n - nl < msl) break;
        const ClassCounts right{parent[0] - left[0], parent[1] - left[1]};
        const auto score = detail::split_score(left, right);
        if (!best || detail::better(score, best_score) ||
            (f < best->feature && !detail::better(best_score, score))) {
          best_score = score;
          best = SplitCandidate{f, ColumnKind::numeric, detail::midpoint(vals[here], vals[next]),
                                left, right, 0.0};
        }
      }
    } else {
      const std::int32_t n_codes = x.n_categories[f];
      std::vector<ClassCounts> per_code(static_cast<std::size_t>(std::max(0, n_codes)),
                                        ClassCounts{0, 0});
      for (auto r : rows) {
        const auto code = static_cast<std::int32_t>(x.at(r, f));
        if (code >= 0 && code < n_codes) ++per_code[code][labels[r]];
      }
      for (std::int32_t c = 0; c < n_codes; ++c) {
        const ClassCounts left = per_code[c];
        const std::int64_t nl = left[0] + left[1];
        if (nl < msl || n - nl < msl) continue;
        const ClassCounts right{parent[0] - left[0], parent[1] - left[1]};
        const auto score = detail::split_score(left, right);
        if (!best || detail::better(score, best_score) ||
            (f < best->feature && !detail::better(best_score, score))) {
          best_score = score;
          best = SplitCandidate{f, ColumnKind::categorical, static_cast<double>(c), left, right,
                                0.0};
        }
      }
    }
  }
  if (!best || !detail::positive_gain(best_score, parent)) return std::nullopt;
  best->impurity_decrease = std::max(0.0, impurity_decrease(parent, best->left, best->right));
  return best;
}

inline std::size_t resolve_mtry(const ForestParams& p, std::size_t n_features) {
  if (p.mtry > 0) return std::min<std::size_t>(static_cast<std::size_t>(p.mtry), n_features);
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features)))));
}

/// Greedy CART growth. Each node draws `mtry` candidate features without
/// replacement from `rng`; growth stops at max_depth, below
/// 2*min_samples_leaf rows, on pure nodes, or when no split has positive gain.
inline DecisionTree fit_tree(std::vector<std::size_t> rows, const FeatureMatrix& x,
                             std::span<const std::uint8_t> labels, const ForestParams& params,
                             Rng& rng, const FeatureRanks* ranks = nullptr) {
  if (rows.empty()) throw ValidationError("fit_tree: no rows");
  const std::size_t mtry = resolve_mtry(params, x.n_features);
  std::vector<std::size_t> pool(x.n_features);

  DecisionTree tree;
  tree.nodes.emplace_back();
  struct Work {
    std::size_t node;
    std::vector<std::size_t> rows;
    int depth;
  };
  std::vector<Work> stack;
  stack.push_back({0, std::move(rows), 0});

  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    ClassCounts counts{0, 0};
    for (auto r : w.rows) ++counts[labels[r]];
    {
      TreeNode& node = tree.nodes[w.node];
      node.n_samples = static_cast<std::int64_t>(w.rows.size());
      node.class_counts = counts;
      node.impurity = gini(counts);
      node.value = static_cast<double>(counts[1]) / static_cast<double>(node.n_samples);
    }
    const bool depth_ok = params.max_depth < 0 || w.depth < params.max_depth;
    const bool pure = counts[0] == 0 || counts[1] == 0;
    if (!depth_ok || pure ||
        static_cast<std::int64_t>(w.rows.size()) < 2 * std::max(1, params.min_samples_leaf))
      continue;

    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < mtry; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<std::size_t> candidates(pool.begin(), pool.begin() + mtry);
    std::sort(candidates.begin(), candidates.end());

    auto split = best_split(w.rows, candidates, x, labels, params.min_samples_leaf, ranks);
    if (!split) continue;

    const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[w.node];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.kind = split->kind;
    node.threshold = split->threshold;
    node.left = left_id;
    node.right = left_id + 1;
    node.impurity_decrease = split->impurity_decrease;

    std::vector<std::size_t> left_rows, right_rows;
    left_rows.reserve(split->left[0] + split->left[1]);
    right_rows.reserve(split->right[0] + split->right[1]);
    for (auto r : w.rows)
      (node.goes_left(x.at(r, split->feature)) ? left_rows : right_rows).push_back(r);
    w.rows.clear();
    w.rows.shrink_to_fit();
    stack.push_back({static_cast<std::size_t>(left_id + 1), std::move(right_rows), w.depth + 1});
    stack.push_back({static_cast<std::size_t>(left_id), std::move(left_rows), w.depth + 1});
  }
  return tree;
}

struct ForestModel {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
  FeatureSchema schema;

  EnsembleView view() const {
    return {trees, trees.empty() ? 0.0 : 1.0 / static_cast<double>(trees.size()), 0.0,
            n_features};
  }
};

/// Bagged CART forest. Tree t draws its bootstrap sample and feature subsets
/// from its own stream derived from (seed, t), so the result does not depend
/// on how trees are scheduled across threads.
inline ForestModel fit_forest(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                              const ForestParams& params, std::uint64_t seed) {
  if (params.n_trees < 1) throw ValidationError("forest needs at least one tree");
  if (x.n_rows == 0) throw ValidationError("forest: empty training set");
  if (labels.size() != x.n_rows) throw ValidationError("forest: label count mismatch");
  ForestModel model;
  model.params = params;
  model.n_features = x.n_features;
  model.seed = seed;
  model.schema.names = x.names;
  model.schema.kinds = x.kinds;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  const FeatureRanks ranks = rank_features(x);
  parallel_for(model.trees.size(), [&](std::size_t t) {
    Rng rng = make_rng(seed, "forest-tree", t);
    std::vector<std::size_t> rows(x.n_rows);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, x.n_rows - 1);
      for (auto& r : rows) r = draw(rng);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees[t] = fit_tree(std::move(rows), x, labels, params, rng, &ranks);
  });
  return model;
}

inline ForestModel fit_forest(const Dataset& ds, const ForestParams& params, std::uint64_t seed) {
  if (ds.has_missing())
    throw ValidationError(
        "fit_forest: dataset has missing cells; impute them or drop incomplete rows first");
  if (ds.labels.size() != ds.n_rows) throw ValidationError("fit_forest: dataset has no labels");
  auto x = to_feature_matrix(ds);
  auto model = fit_forest(x, ds.labels, params, seed);
  model.schema = schema_of(ds);
  return model;
}

inline void check_dims(std::size_t model_features, const FeatureMatrix& x) {
  if (x.n_features != model_features)
    throw ValidationError("model expects " + std::to_string(model_features) +
                          " features, input has " + std::to_string(x.n_features));
}

/// Mean over trees of the leaf positive-class fraction.
inline std::vector<double> predict_proba_forest(const ForestModel& model, const FeatureMatrix& x) {
  check_dims(model.n_features, x);
  if (model.trees.empty()) throw ValidationError("forest has no trees");
  std::vector<double> out(x.n_rows);
  const auto view = model.view();
  parallel_for(x.n_rows, [&](std::size_t r) { out[r] = view.output(x.row(r)); });
  return out;
}

struct ImportanceProfile {
  std::vector<double> scores;
  bool normalized = false;
};

inline ImportanceProfile normalize_profile(std::vector<double> scores) {
  double total = 0.0;
  for (double s : scores) total += s;
  ImportanceProfile p;
  if (total > 0.0) {
    for (double& s : scores) s /= total;
    p.normalized = true;
  }
  p.scores = std::move(scores);
  return p;
}

/// Mean-decrease-in-impurity before normalization:
/// (1/T) sum_t sum_{nodes n splitting j} (N_n / N_t) * delta_i_n, with N_t the
/// sample count at tree t's root.
inline std::vector<double> forest_importance_raw(const ForestModel& model) {
  std::vector<double> scores(model.n_features, 0.0);
  if (model.trees.empty()) return scores;
  for (const auto& tree : model.trees) {
    const double root_n = static_cast<double>(tree.nodes.front().n_samples);
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      scores.at(static_cast<std::size_t>(node.feature)) +=
          static_cast<double>(node.n_samples) / root_n * node.impurity_decrease;
    }
  }
  const double t = static_cast<double>(model.trees.size());
  for (double& s : scores) s /= t;
  return scores;
}

inline ImportanceProfile forest_importance(const ForestModel& model) {
  return normalize_profile(forest_importance_raw(model));
}

}  // namespace icui

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "icui/common.hpp"
#include "icui/data_model.hpp"
#include "icui/forest.hpp"
#include "icui/tree.hpp"

namespace icui {

struct BoostParams {
  int n_rounds = 200;
  double eta = 0.1;
  int max_depth = 4;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  double subsample = 1.0;         // row fraction per round
  double colsample_bytree = 1.0;  // feature fraction per tree

  void validate() const {
    if (n_rounds < 0) throw ValidationError("n_rounds must be >= 0");
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("eta must lie in (0, 1]");
    if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
    if (gamma < 0.0) throw ValidationError("gamma must be >= 0");
    if (max_depth < 0) throw ValidationError("max_depth must be >= 0");
    if (min_child_weight < 0.0) throw ValidationError("min_child_weight must be >= 0");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw ValidationError("subsample must lie in (0, 1]");
    if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0))
      throw ValidationError("colsample_bytree must lie in (0, 1]");
  }
};

enum class Objective { logistic, squared };

struct BoostedModel {
  std::vector<DecisionTree> trees;
  double base_score = 0.0;  // margin before any tree
  BoostParams params;
  Objective objective = Objective::logistic;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
  FeatureSchema schema;
  std::vector<double> train_loss;  // after each round; entry 0 is the base score alone

  EnsembleView view() const { return {trees, params.eta, base_score, n_features}; }
};

inline double logistic(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

struct GradHess {
  double g;
  double h;
};

inline GradHess logistic_grad_hess(std::uint8_t label, double margin) {
  const double p = logistic(margin);
  return {p - static_cast<double>(label), p * (1.0 - p)};
}

/// Newton step -G / (H + lambda) minimizing the second-order loss expansion.
inline double leaf_weight(double grad_sum, double hess_sum, double lambda) {
  return -grad_sum / (hess_sum + lambda);
}

inline double split_gain(double gl, double hl, double gr, double hr, double lambda,
                         double gamma) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

namespace detail {

struct NewtonSplit {
  bool found = false;
  double gain = 0.0;
  ColumnKind kind = ColumnKind::numeric;
  double threshold = 0.0;
};

/// Numeric feature order with values stored alongside for cache-friendly scans.
struct SortedColumn {
  std::vector<std::uint32_t> rows;
  std::vector<double> values;
};

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
  std::int64_t count = 0;
};

/// Grows one depth-limited regression tree on (g, h) with exact greedy
/// enumeration. `node_of_row[r] < 0` excludes row r.
inline DecisionTree grow_newton_tree(const FeatureMatrix& x,
                                     const std::vector<SortedColumn>& sorted,
                                     std::span<const double> g, std::span<const double> h,
                                     std::vector<std::int32_t>& node_of_row,
                                     std::span<const std::size_t> features,
                                     const BoostParams& p) {
  DecisionTree tree;
  tree.nodes.emplace_back();
  std::vector<NodeStats> stats(1);
  for (std::size_t r = 0; r < x.n_rows; ++r) {
    if (node_of_row[r] < 0) continue;
    stats[0].g += g[r];
    stats[0].h += h[r];
    ++stats[0].count;
  }
  std::vector<std::int32_t> frontier{0};
  std::vector<std::int32_t> slot_of_node(1, 0);

  for (int depth = 0; depth < p.max_depth && !frontier.empty(); ++depth) {
    const std::size_t nf = frontier.size();
    slot_of_node.assign(tree.nodes.size(), -1);
    for (std::size_t k = 0; k < nf; ++k) slot_of_node[frontier[k]] = static_cast<std::int32_t>(k);

    std::vector<std::vector<NewtonSplit>> per_feature(features.size(),
                                                      std::vector<NewtonSplit>(nf));
    parallel_for(features.size(), [&](std::size_t fi) {
      const std::size_t f = features[fi];
      auto& best = per_feature[fi];
      auto consider = [&](std::size_t k, double gl, double hl, ColumnKind kind, double thr) {
        const NodeStats& s = stats[frontier[k]];
        const double gr = s.g - gl, hr = s.h - hl;
        if (hl < p.min_child_weight || hr < p.min_child_weight) return;
        const double gain = split_gain(gl, hl, gr, hr, p.lambda, p.gamma);
        if (!best[k].found || gain > best[k].gain) best[k] = {true, gain, kind, thr};
      };
      if (x.kinds[f] == ColumnKind::numeric) {
        std::vector<double> gl(nf, 0.0), hl(nf, 0.0), last(nf, 0.0);
        std::vector<std::int64_t> cnt(nf, 0);
        const auto& col = sorted[f];
        for (std::size_t i = 0; i < col.rows.size(); ++i) {
          const std::uint32_t r = col.rows[i];
          const std::int32_t nd = node_of_row[r];
          if (nd < 0) continue;
          const std::int32_t k = slot_of_node[nd];
          if (k < 0) continue;
          const double v = col.values[i];
          if (cnt[k] > 0 && v > last[k] && cnt[k] < stats[frontier[k]].count)
            consider(k, gl[k], hl[k], ColumnKind::numeric, midpoint(last[k], v));
          gl[k] += g[r];
          hl[k] += h[r];
          ++cnt[k];
          last[k] = v;
        }
      } else {
        const auto n_codes = static_cast<std::size_t>(std::max(0, x.n_categories[f]));
        std::vector<NodeStats> acc(nf * n_codes);
        for (std::size_t r = 0; r < x.n_rows; ++r) {
          const std::int32_t nd = node_of_row[r];
          if (nd < 0) continue;
          const std::int32_t k = slot_of_node[nd];
          if (k < 0) continue;
          const auto code = static_cast<std::int64_t>(x.at(r, f));
          if (code < 0 || code >= static_cast<std::int64_t>(n_codes)) continue;
          auto& a = acc[k * n_codes + static_cast<std::size_t>(code)];
          a.g += g[r];
          a.h += h[r];
          ++a.count;
        }
        for (std::size_t k = 0; k < nf; ++k)
          for (std::size_t c = 0; c < n_codes; ++c) {
            const auto& a = acc[k * n_codes + c];
            if (a.count == 0 || a.count == stats[frontier[k]].count) continue;
            consider(k, a.g, a.h, ColumnKind::categorical, static_cast<double>(c));
          }
      }
    });

    std::vector<std::int32_t> next;
    std::vector<std::int32_t> split_nodes;
    for (std::size_t k = 0; k < nf; ++k) {
      NewtonSplit chosen;
      std::size_t chosen_feature = 0;
      for (std::size_t fi = 0; fi < features.size(); ++fi) {
        const auto& c = per_feature[fi][k];
        if (c.found && (!chosen.found || c.gain > chosen.gain)) {
          chosen = c;
          chosen_feature = features[fi];
        }
      }
      if (!chosen.found || !(chosen.gain > 0.0)) continue;
      const auto id = frontier[k];
      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stats.resize(tree.nodes.size());
      TreeNode& node = tree.nodes[id];
      node.feature = static_cast<std::int32_t>(chosen_feature);
      node.kind = chosen.kind;
      node.threshold = chosen.threshold;
      node.left = left;
      node.right = left + 1;
      node.gain = chosen.gain;
      split_nodes.push_back(id);
      next.push_back(left);
      next.push_back(left + 1);
    }
    if (split_nodes.empty()) break;
    for (std::size_t r = 0; r < x.n_rows; ++r) {
      const std::int32_t nd = node_of_row[r];
      if (nd < 0 || tree.nodes[nd].is_leaf()) continue;
      const TreeNode& node = tree.nodes[nd];
      node_of_row[r] = node.goes_left(x.at(r, node.feature)) ? node.left : node.right;
    }
    for (auto id : next) stats[id] = {};
    for (std::size_t r = 0; r < x.n_rows; ++r) {
      const std::int32_t nd = node_of_row[r];
      if (nd < 0 || nd < next.front()) continue;
      stats[nd].g += g[r];
      stats[nd].h += h[r];
      ++stats[nd].count;
    }
    frontier = std::move(next);
  }

  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    TreeNode& node = tree.nodes[i];
    node.n_samples = stats[i].count;
    node.hessian = stats[i].h;
    if (node.is_leaf()) node.value = leaf_weight(stats[i].g, stats[i].h, p.lambda);
  }
  return tree;
}

inline double mean_loss(Objective obj, std::span<const double> target,
                        std::span<const double> margin) {
  double total = 0.0;
  for (std::size_t r = 0; r < target.size(); ++r) {
    if (obj == Objective::squared) {
      const double d = margin[r] - target[r];
      total += d * d;
    } else {
      // log(1 + e^m) - y*m, evaluated without overflow
      const double m = margin[r];
      const double softplus = m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
      total += softplus - target[r] * m;
    }
  }
  return target.empty() ? 0.0 : total / static_cast<double>(target.size());
}

}  // namespace detail

/// Second-order additive tree fitting. `target` is 0/1 for the logistic
/// objective and real-valued for squared loss.
inline BoostedModel fit_newton(const FeatureMatrix& x, std::span<const double> target,
                               Objective objective, const BoostParams& params,
                               std::uint64_t seed) {
  params.validate();
  if (x.n_rows == 0) throw ValidationError("boosting: empty training set");
  if (target.size() != x.n_rows) throw ValidationError("boosting: target size mismatch");

  BoostedModel model;
  model.params = params;
  model.objective = objective;
  model.n_features = x.n_features;
  model.seed = seed;
  model.schema.names = x.names;
  model.schema.kinds = x.kinds;

  const double mean = std::accumulate(target.begin(), target.end(), 0.0) /
                      static_cast<double>(target.size());
  if (objective == Objective::logistic) {
    if (!(mean > 0.0 && mean < 1.0))
      throw ValidationError("boosting: prevalence is 0 or 1, base-score logit undefined");
    model.base_score = std::log(mean / (1.0 - mean));
  } else {
    model.base_score = mean;
  }

  std::vector<detail::SortedColumn> sorted(x.n_features);
  parallel_for(x.n_features, [&](std::size_t f) {
    if (x.kinds[f] != ColumnKind::numeric) return;
    auto& idx = sorted[f].rows;
    idx.resize(x.n_rows);
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x.at(a, f) < x.at(b, f); });
    sorted[f].values.reserve(x.n_rows);
    for (auto r : idx) sorted[f].values.push_back(x.at(r, f));
  });

  std::vector<double> margin(x.n_rows, model.base_score), g(x.n_rows), h(x.n_rows);
  std::vector<std::int32_t> node_of_row(x.n_rows);
  std::vector<std::size_t> all_features(x.n_features);
  std::iota(all_features.begin(), all_features.end(), 0);
  model.train_loss.push_back(detail::mean_loss(objective, target, margin));
  Rng rng = make_rng(seed, "boost");

  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t r = 0; r < x.n_rows; ++r) {
      if (objective == Objective::logistic) {
        const auto gh = logistic_grad_hess(static_cast<std::uint8_t>(target[r]), margin[r]);
        g[r] = gh.g;
        h[r] = gh.h;
      } else {
        g[r] = margin[r] - target[r];
        h[r] = 1.0;
      }
    }
    std::fill(node_of_row.begin(), node_of_row.end(), 0);
    if (params.subsample < 1.0) {
      std::vector<std::size_t> perm(x.n_rows);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(params.subsample * static_cast<double>(x.n_rows)));
      for (std::size_t i = keep; i < perm.size(); ++i) node_of_row[perm[i]] = -1;
    }
    std::vector<std::size_t> features = all_features;
    if (params.colsample_bytree < 1.0) {
      std::shuffle(features.begin(), features.end(), rng);
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(params.colsample_bytree * static_cast<double>(x.n_features)));
      features.resize(keep);
      std::sort(features.begin(), features.end());
    }
    DecisionTree tree = detail::grow_newton_tree(x, sorted, g, h, node_of_row, features, params);
    for (std::size_t r = 0; r < x.n_rows; ++r) margin[r] += params.eta * tree.predict(x.row(r));
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(detail::mean_loss(objective, target, margin));
  }
  return model;
}

inline BoostedModel fit_boosted(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                                const BoostParams& params, std::uint64_t seed) {
  std::vector<double> target(labels.begin(), labels.end());
  return fit_newton(x, target, Objective::logistic, params, seed);
}

inline BoostedModel fit_boosted(const Dataset& ds, const BoostParams& params, std::uint64_t seed) {
  if (ds.has_missing())
    throw ValidationError(
        "fit_boosted: dataset has missing cells; impute them or drop incomplete rows first");
  if (ds.labels.size() != ds.n_rows) throw ValidationError("fit_boosted: dataset has no labels");
  auto model = fit_boosted(to_feature_matrix(ds), ds.labels, params, seed);
  model.schema = schema_of(ds);
  return model;
}

inline std::vector<double> predict_margin(const BoostedModel& model, const FeatureMatrix& x) {
  check_dims(model.n_features, x);
  std::vector<double> out(x.n_rows);
  const auto view = model.view();
  parallel_for(x.n_rows, [&](std::size_t r) { out[r] = view.output(x.row(r)); });
  return out;
}

inline std::vector<double> predict_proba_boosted(const BoostedModel& model,
                                                 const FeatureMatrix& x) {
  auto m = predict_margin(model, x);
  for (double& v : m) v = logistic(v);
  return m;
}

}  // namespace icui

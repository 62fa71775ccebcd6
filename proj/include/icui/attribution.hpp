#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "icui/boost.hpp"
#include "icui/common.hpp"
#include "icui/data_model.hpp"
#include "icui/forest.hpp"
#include "icui/tree.hpp"

namespace icui {

enum class OutputSpace { margin, probability };

inline const char* to_string(OutputSpace s) {
  return s == OutputSpace::margin ? "margin" : "probability";
}

/// Per-row Shapley values. Local accuracy:
/// base_value + sum_i phi(row, i) == model output of that row.
struct AttributionMatrix {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::vector<double> phi;
  double base_value = 0.0;
  OutputSpace output_space = OutputSpace::probability;
  std::vector<std::size_t> row_ids;

  double at(std::size_t row, std::size_t feature) const { return phi[row * n_features + feature]; }
  std::span<const double> row(std::size_t r) const {
    return {phi.data() + r * n_features, n_features};
  }
};

inline OutputSpace output_space_of(const ForestModel&) { return OutputSpace::probability; }
inline OutputSpace output_space_of(const BoostedModel&) { return OutputSpace::margin; }

// ---------------------------------------------------------------------------
// Coalition value: expected tree output when only the features in S are
// fixed to the row. Splits on features outside S average both children by
// their training sample counts.

inline long double coalition_value(const DecisionTree& tree, std::size_t node,
                                   std::span<const double> row,
                                   const std::vector<std::uint8_t>& in_s) {
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf()) return n.value;
  if (in_s[n.feature])
    return coalition_value(tree, n.goes_left(row[n.feature]) ? n.left : n.right, row, in_s);
  const TreeNode& l = tree.nodes[n.left];
  const TreeNode& r = tree.nodes[n.right];
  const long double total = static_cast<long double>(n.n_samples);
  return (l.n_samples * coalition_value(tree, n.left, row, in_s) +
          r.n_samples * coalition_value(tree, n.right, row, in_s)) /
         total;
}

inline long double coalition_value(const EnsembleView& model, std::span<const double> row,
                                   const std::vector<std::uint8_t>& in_s) {
  long double sum = 0.0L;
  for (const auto& t : model.trees) sum += coalition_value(t, 0, row, in_s);
  return static_cast<long double>(model.bias) + static_cast<long double>(model.scale) * sum;
}

/// s!(m-s-1)!/m! for s = 0..m-1, in extended precision.
inline std::vector<long double> shapley_weights(std::size_t m) {
  std::vector<long double> fact(m + 1, 1.0L);
  for (std::size_t i = 1; i <= m; ++i) fact[i] = fact[i - 1] * static_cast<long double>(i);
  std::vector<long double> w(m);
  for (std::size_t s = 0; s < m; ++s) w[s] = fact[s] * fact[m - s - 1] / fact[m];
  return w;
}

struct ShapleyResult {
  std::vector<double> phi;
  double base_value = 0.0;
};

inline constexpr std::size_t kBruteforceFeatureLimit = 20;

/// Exact Shapley values by enumerating every coalition of the model's
/// features. Exponential; meant as a reference for small models.
inline ShapleyResult shapley_bruteforce(const EnsembleView& model, std::span<const double> row) {
  const std::size_t m = model.n_features;
  if (m > kBruteforceFeatureLimit)
    throw ValidationError("shapley_bruteforce: " + std::to_string(m) +
                          " features exceed the enumeration limit of " +
                          std::to_string(kBruteforceFeatureLimit) + "; use tree_shap");
  if (row.size() != m) throw ValidationError("shapley_bruteforce: row has wrong dimension");
  const std::size_t n_subsets = std::size_t{1} << m;
  std::vector<long double> value(n_subsets);
  std::vector<std::uint8_t> in_s(m);
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    for (std::size_t i = 0; i < m; ++i) in_s[i] = (mask >> i) & 1u;
    value[mask] = coalition_value(model, row, in_s);
  }
  const auto w = shapley_weights(m);
  ShapleyResult out;
  out.phi.assign(m, 0.0);
  out.base_value = static_cast<double>(value[0]);
  for (std::size_t i = 0; i < m; ++i) {
    long double acc = 0.0L;
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      if (mask & bit) continue;
      acc += w[static_cast<std::size_t>(__builtin_popcountll(mask))] *
             (value[mask | bit] - value[mask]);
    }
    out.phi[i] = static_cast<double>(acc);
  }
  return out;
}

template <typename Model>
ShapleyResult shapley_bruteforce(const Model& model, std::span<const double> row) {
  return shapley_bruteforce(model.view(), row);
}

// ---------------------------------------------------------------------------
// Polynomial-time path algorithm.

namespace detail {

struct PathElement {
  std::int32_t feature;
  double zero_fraction;
  double one_fraction;
  double weight;
};
using Path = std::vector<PathElement>;

inline void extend_path(Path& path, double zero_fraction, double one_fraction,
                        std::int32_t feature) {
  const std::size_t n = path.size();
  path.push_back({feature, zero_fraction, one_fraction, n == 0 ? 1.0 : 0.0});
  for (std::size_t k = n; k-- > 0;) {
    path[k + 1].weight += one_fraction * path[k].weight * static_cast<double>(k + 1) /
                          static_cast<double>(n + 1);
    path[k].weight =
        zero_fraction * path[k].weight * static_cast<double>(n - k) / static_cast<double>(n + 1);
  }
}

inline void unwind_path(Path& path, std::size_t index) {
  const std::size_t n = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[n].weight;
  for (std::size_t j = n; j-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[j].weight;
      path[j].weight = next * static_cast<double>(n + 1) / (static_cast<double>(j + 1) * one);
      next = tmp - path[j].weight * zero * static_cast<double>(n - j) / static_cast<double>(n + 1);
    } else {
      path[j].weight = path[j].weight * static_cast<double>(n + 1) /
                       (zero * static_cast<double>(n - j));
    }
  }
  for (std::size_t j = index; j < n; ++j) {
    path[j].feature = path[j + 1].feature;
    path[j].zero_fraction = path[j + 1].zero_fraction;
    path[j].one_fraction = path[j + 1].one_fraction;
  }
  path.pop_back();
}

/// Total permutation weight of the path with element `index` removed.
inline double unwound_sum(const Path& path, std::size_t index) {
  const std::size_t n = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[n].weight;
  double total = 0.0;
  if (one != 0.0) {
    for (std::size_t j = n; j-- > 0;) {
      const double tmp = next / (static_cast<double>(j + 1) * one);
      total += tmp;
      next = path[j].weight - tmp * zero * static_cast<double>(n - j);
    }
  } else {
    for (std::size_t j = n; j-- > 0;)
      total += path[j].weight / (zero * static_cast<double>(n - j));
  }
  return total * static_cast<double>(n + 1);
}

inline void tree_shap_recurse(const DecisionTree& tree, std::size_t node,
                              std::span<const double> row, Path path, double zero_fraction,
                              double one_fraction, std::int32_t feature,
                              std::span<double> phi) {
  extend_path(path, zero_fraction, one_fraction, feature);
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf()) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      const double w = unwound_sum(path, i);
      phi[path[i].feature] += w * (path[i].one_fraction - path[i].zero_fraction) * n.value;
    }
    return;
  }
  const bool left = n.goes_left(row[n.feature]);
  const std::size_t hot = static_cast<std::size_t>(left ? n.left : n.right);
  const std::size_t cold = static_cast<std::size_t>(left ? n.right : n.left);
  double incoming_zero = 1.0, incoming_one = 1.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (path[k].feature == n.feature) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, k);
      break;
    }
  }
  const double total = static_cast<double>(n.n_samples);
  tree_shap_recurse(tree, hot, row, path,
                    incoming_zero * static_cast<double>(tree.nodes[hot].n_samples) / total,
                    incoming_one, n.feature, phi);
  tree_shap_recurse(tree, cold, row, std::move(path),
                    incoming_zero * static_cast<double>(tree.nodes[cold].n_samples) / total, 0.0,
                    n.feature, phi);
}

inline double expected_value(const DecisionTree& tree) {
  double e = 0.0;
  const double root = static_cast<double>(tree.nodes.front().n_samples);
  for (const auto& n : tree.nodes)
    if (n.is_leaf()) e += static_cast<double>(n.n_samples) / root * n.value;
  return e;
}

inline void check_cover(const DecisionTree& tree) {
  for (const auto& n : tree.nodes) {
    if (n.n_samples <= 0)
      throw ValidationError("tree_shap: node missing n_samples metadata");
    if (!n.is_leaf() &&
        tree.nodes[n.left].n_samples + tree.nodes[n.right].n_samples != n.n_samples)
      throw ValidationError("tree_shap: inconsistent n_samples metadata");
  }
}

}  // namespace detail

/// Base value of the path-dependent coalition value, f(empty set).
inline double expected_output(const EnsembleView& model) {
  double s = 0.0;
  for (const auto& t : model.trees) s += detail::expected_value(t);
  return model.bias + model.scale * s;
}

inline AttributionMatrix tree_shap(const EnsembleView& model, const FeatureMatrix& x,
                                   OutputSpace space) {
  check_dims(model.n_features, x);
  for (const auto& t : model.trees) detail::check_cover(t);
  AttributionMatrix out;
  out.n_rows = x.n_rows;
  out.n_features = x.n_features;
  out.phi.assign(x.n_rows * x.n_features, 0.0);
  out.output_space = space;
  out.base_value = expected_output(model);
  out.row_ids.resize(x.n_rows);
  for (std::size_t r = 0; r < x.n_rows; ++r) out.row_ids[r] = r;
  parallel_for(x.n_rows, [&](std::size_t r) {
    std::span<double> phi(out.phi.data() + r * x.n_features, x.n_features);
    std::vector<double> tree_phi(x.n_features);
    for (const auto& t : model.trees) {
      if (t.nodes.front().is_leaf()) continue;
      std::fill(tree_phi.begin(), tree_phi.end(), 0.0);
      detail::Path path;
      path.reserve(static_cast<std::size_t>(t.depth()) + 2);
      detail::tree_shap_recurse(t, 0, x.row(r), std::move(path), 1.0, 1.0, -1, tree_phi);
      for (std::size_t f = 0; f < x.n_features; ++f) phi[f] += tree_phi[f];
    }
    for (double& v : phi) v *= model.scale;
  });
  return out;
}

/// Forests attribute averaged probabilities; boosted models attribute margins.
template <typename Model>
AttributionMatrix tree_shap(const Model& model, const FeatureMatrix& x) {
  return tree_shap(model.view(), x, output_space_of(model));
}

/// Mean absolute attribution per feature, normalized to sum 1.
inline ImportanceProfile global_shap_importance(const AttributionMatrix& attr) {
  if (attr.n_rows == 0) throw ValidationError("global_shap_importance: empty attribution matrix");
  std::vector<double> scores(attr.n_features, 0.0);
  for (std::size_t r = 0; r < attr.n_rows; ++r)
    for (std::size_t f = 0; f < attr.n_features; ++f) scores[f] += std::fabs(attr.at(r, f));
  for (double& s : scores) s /= static_cast<double>(attr.n_rows);
  return normalize_profile(std::move(scores));
}

inline void write_attribution_csv(std::ostream& os, const AttributionMatrix& attr,
                                  const std::vector<std::string>& feature_names) {
  std::vector<std::string> header{"row_id", "base_value"};
  header.insert(header.end(), feature_names.begin(), feature_names.end());
  csv::write_row(os, header);
  std::vector<std::string> fields(header.size());
  for (std::size_t r = 0; r < attr.n_rows; ++r) {
    fields[0] = std::to_string(attr.row_ids.empty() ? r : attr.row_ids[r]);
    fields[1] = format_double(attr.base_value);
    for (std::size_t f = 0; f < attr.n_features; ++f) fields[2 + f] = format_double(attr.at(r, f));
    csv::write_row(os, fields);
  }
}

}  // namespace icui

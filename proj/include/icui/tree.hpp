#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "icui/data_model.hpp"

namespace icui {

/// Node of a binary decision tree shared by forests and boosted models.
/// Numeric splits send `x <= threshold` left; categorical splits send
/// `x == threshold` (a category code) left.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  ColumnKind kind = ColumnKind::numeric;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int64_t n_samples = 0;
  /// Leaf output: positive-class fraction (forest) or raw leaf weight (boosted).
  double value = 0.0;

  // Gini bookkeeping (forest).
  std::array<std::int64_t, 2> class_counts{0, 0};
  double impurity = 0.0;
  double impurity_decrease = 0.0;

  // Newton bookkeeping (boosted).
  double gain = 0.0;
  double hessian = 0.0;

  bool is_leaf() const { return feature < 0; }
  bool goes_left(double x) const {
    return kind == ColumnKind::numeric ? x <= threshold : x == threshold;
  }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t leaf_of(std::span<const double> row) const {
    std::size_t n = 0;
    while (!nodes[n].is_leaf())
      n = static_cast<std::size_t>(nodes[n].goes_left(row[nodes[n].feature]) ? nodes[n].left
                                                                            : nodes[n].right);
    return n;
  }
  double predict(std::span<const double> row) const { return nodes[leaf_of(row)].value; }

  std::size_t internal_count() const {
    std::size_t c = 0;
    for (const auto& n : nodes) c += !n.is_leaf();
    return c;
  }
  int depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].is_leaf()) continue;
      d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
      best = std::max(best, d[i] + 1);
    }
    return best;
  }
};

/// Any additive tree ensemble: output(x) = bias + scale * sum_t value_t(x).
/// A forest averages probabilities (scale 1/T, bias 0); a boosted model sums
/// shrunken leaf weights on top of its base margin.
struct EnsembleView {
  std::span<const DecisionTree> trees;
  double scale = 1.0;
  double bias = 0.0;
  std::size_t n_features = 0;

  double output(std::span<const double> row) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(row);
    return bias + scale * s;
  }
};

}  // namespace icui

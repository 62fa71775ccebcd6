#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "icui/common.hpp"
#include "icui/data_model.hpp"
#include "icui/forest.hpp"

namespace icui {

struct ClusterModel {
  std::vector<double> centroids;
  std::vector<std::size_t> assignment;  // value index -> cluster id
  std::size_t k = 0;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> objective_history;  // after every Lloyd update
  std::vector<std::string> warnings;
};

namespace detail {

inline std::size_t nearest(double v, std::span<const double> centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = (v - centroids[c]) * (v - centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline double kmeans_objective(std::span<const double> values,
                               std::span<const std::size_t> assignment,
                               std::span<const double> centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - centroids[assignment[i]];
    total += d * d;
  }
  return total;
}

inline void update_centroids(std::span<const double> values,
                             std::span<const std::size_t> assignment,
                             std::vector<double>& centroids) {
  std::vector<double> sum(centroids.size(), 0.0);
  std::vector<std::size_t> count(centroids.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[assignment[i]] += values[i];
    ++count[assignment[i]];
  }
  for (std::size_t c = 0; c < centroids.size(); ++c)
    if (count[c] > 0) centroids[c] = sum[c] / static_cast<double>(count[c]);
}

}  // namespace detail

/// Lloyd's algorithm on scalar values with seeded k-means++ seeding. Points
/// go to the nearest centroid (ties to the lower cluster id); an empty cluster
/// takes over the point farthest from its current centroid. If fewer than K
/// distinct values exist, K drops to that count and a warning is recorded.
inline ClusterModel kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed,
                              std::size_t max_iter = 300, double tol = 1e-10) {
  if (k == 0) throw ValidationError("kmeans_1d: K must be positive");
  if (values.empty()) throw ValidationError("kmeans_1d: no values");
  ClusterModel model;
  model.seed = seed;
  const std::set<double> distinct(values.begin(), values.end());
  if (distinct.size() < k) {
    model.warnings.push_back("K reduced from " + std::to_string(k) + " to " +
                             std::to_string(distinct.size()) + " (distinct values)");
    k = distinct.size();
  }
  model.k = k;
  const std::size_t n = values.size();

  Rng rng = make_rng(seed, "kmeans++");
  std::vector<double>& centroids = model.centroids;
  centroids.push_back(values[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centroids) best = std::min(best, (values[i] - c) * (values[i] - c));
      d2[i] = best;
      total += best;
    }
    double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      target -= d2[i];
      if (target < 0.0) break;
    }
    centroids.push_back(values[pick]);
  }

  auto& assign = model.assignment;
  assign.assign(n, 0);
  std::vector<std::size_t> previous;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) assign[i] = detail::nearest(values[i], centroids);

    // Repair empty clusters, one seized point at a time.
    for (;;) {
      std::vector<std::size_t> count(k, 0);
      for (auto a : assign) ++count[a];
      auto empty = std::find(count.begin(), count.end(), 0u);
      if (empty == count.end()) break;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[assign[i]] < 2) continue;
        const double d = std::fabs(values[i] - centroids[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      const auto c = static_cast<std::size_t>(empty - count.begin());
      assign[far] = c;
      centroids[c] = values[far];
    }

    const bool stable = assign == previous;
    previous = assign;
    const std::vector<double> before = centroids;
    detail::update_centroids(values, assign, centroids);
    model.objective_history.push_back(detail::kmeans_objective(values, assign, centroids));
    model.iterations = iter + 1;
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::fabs(centroids[c] - before[c]));
    if (stable || shift < tol) {
      // Converged once no point prefers another centroid.
      bool consistent = true;
      for (std::size_t i = 0; i < n && consistent; ++i)
        consistent = detail::nearest(values[i], centroids) == assign[i];
      if (consistent) break;
    }
  }
  model.objective = detail::kmeans_objective(values, assign, centroids);
  return model;
}

struct RankedCluster {
  std::size_t rank = 0;  // 1-based
  std::size_t cluster_id = 0;
  std::vector<std::size_t> members;  // sorted by importance desc
  double aggregated_importance = 0.0;
  double centroid = 0.0;
};

struct ClusterReport {
  std::size_t fold = 0;
  std::vector<RankedCluster> ranked_clusters;
  std::vector<std::string> warnings;

  /// Rank (1-based) of the cluster containing `feature`.
  std::size_t rank_of(std::size_t feature) const {
    for (const auto& c : ranked_clusters)
      if (std::find(c.members.begin(), c.members.end(), feature) != c.members.end()) return c.rank;
    return 0;
  }
};

/// Clusters features by their importance score and ranks clusters by summed
/// importance (ties to the cluster holding the lower feature index).
inline ClusterReport cluster_importance(const ImportanceProfile& profile, std::size_t k,
                                        std::uint64_t seed, std::size_t fold = 0) {
  const auto& s = profile.scores;
  if (std::none_of(s.begin(), s.end(), [](double v) { return v > 0.0; }))
    throw ValidationError("cluster_importance: profile has no positive score");
  ClusterModel km = kmeans_1d(s, k, seed);
  ClusterReport report;
  report.fold = fold;
  report.warnings = km.warnings;
  std::vector<RankedCluster> clusters(km.k);
  for (std::size_t c = 0; c < km.k; ++c) {
    clusters[c].cluster_id = c;
    clusters[c].centroid = km.centroids[c];
  }
  for (std::size_t f = 0; f < s.size(); ++f) clusters[km.assignment[f]].members.push_back(f);
  for (auto& c : clusters) {
    std::stable_sort(c.members.begin(), c.members.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    for (auto f : c.members) c.aggregated_importance += s[f];
  }
  auto min_member = [](const RankedCluster& c) {
    return *std::min_element(c.members.begin(), c.members.end());
  };
  std::sort(clusters.begin(), clusters.end(), [&](const RankedCluster& a, const RankedCluster& b) {
    if (a.aggregated_importance != b.aggregated_importance)
      return a.aggregated_importance > b.aggregated_importance;
    return min_member(a) < min_member(b);
  });
  for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i].rank = i + 1;
  report.ranked_clusters = std::move(clusters);
  return report;
}

/// Feature-by-(fold, cluster rank) table. Rows are features by mean
/// importance across folds (desc); a cell holds the feature's importance in
/// the column of the cluster it joined, zero elsewhere.
struct HeatmapTable {
  std::vector<std::size_t> row_features;
  std::vector<std::string> row_names;
  std::vector<std::pair<std::size_t, std::size_t>> columns;  // (fold 1-based, rank 1-based)
  std::vector<double> cells;                                  // row-major
  std::vector<double> mean_importance;                        // per row

  std::size_t n_rows() const { return row_features.size(); }
  std::size_t n_cols() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return cells[r * columns.size() + c]; }
};

inline HeatmapTable build_heatmap(std::span<const ClusterReport> reports,
                                  std::span<const ImportanceProfile> profiles,
                                  const std::vector<std::string>& feature_names) {
  if (reports.size() != profiles.size() || reports.empty())
    throw ValidationError("build_heatmap: need one cluster report per importance profile");
  const std::size_t nf = feature_names.size();
  for (std::size_t f = 0; f < reports.size(); ++f) {
    if (profiles[f].scores.size() != nf)
      throw ValidationError("build_heatmap: folds do not share a feature set");
    std::size_t covered = 0;
    for (const auto& c : reports[f].ranked_clusters) {
      for (auto m : c.members)
        if (m >= nf) throw ValidationError("build_heatmap: folds do not share a feature set");
      covered += c.members.size();
    }
    if (covered != nf) throw ValidationError("build_heatmap: folds do not share a feature set");
  }
  HeatmapTable t;
  std::vector<double> mean(nf, 0.0);
  for (const auto& p : profiles)
    for (std::size_t i = 0; i < nf; ++i) mean[i] += p.scores[i];
  for (double& m : mean) m /= static_cast<double>(profiles.size());
  t.row_features.resize(nf);
  std::iota(t.row_features.begin(), t.row_features.end(), 0);
  std::stable_sort(t.row_features.begin(), t.row_features.end(),
                   [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  for (auto f : t.row_features) {
    t.row_names.push_back(feature_names[f]);
    t.mean_importance.push_back(mean[f]);
  }
  for (std::size_t fold = 0; fold < reports.size(); ++fold)
    for (const auto& c : reports[fold].ranked_clusters) t.columns.emplace_back(fold + 1, c.rank);
  t.cells.assign(nf * t.columns.size(), 0.0);
  std::size_t col0 = 0;
  for (std::size_t fold = 0; fold < reports.size(); ++fold) {
    for (std::size_t r = 0; r < nf; ++r) {
      const std::size_t f = t.row_features[r];
      const std::size_t rank = reports[fold].rank_of(f);
      t.cells[r * t.columns.size() + col0 + rank - 1] = profiles[fold].scores[f];
    }
    col0 += reports[fold].ranked_clusters.size();
  }
  return t;
}

inline void write_heatmap_csv(std::ostream& os, const HeatmapTable& t) {
  std::vector<std::string> header{"feature", "mean_importance"};
  for (auto [fold, rank] : t.columns)
    header.push_back("fold" + std::to_string(fold) + "_cluster" + std::to_string(rank));
  csv::write_row(os, header);
  std::vector<std::string> fields(header.size());
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    fields[0] = t.row_names[r];
    fields[1] = format_double(t.mean_importance[r]);
    for (std::size_t c = 0; c < t.n_cols(); ++c) fields[2 + c] = format_double(t.at(r, c));
    csv::write_row(os, fields);
  }
}

}  // namespace icui

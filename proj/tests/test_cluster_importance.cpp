#include <gtest/gtest.h>

#include <set>

#include "helpers.hpp"

using namespace icui;

TEST(KMeans, SingleClusterIsTheMean) {
  const std::vector<double> v{1, 2, 4, 9};
  const auto m = kmeans_1d(v, 1, 3);
  EXPECT_DOUBLE_EQ(m.centroids[0], 4.0);
  EXPECT_DOUBLE_EQ(m.objective, 9 + 4 + 0 + 25);
}

TEST(KMeans, OneClusterPerDistinctValue) {
  const std::vector<double> v{3, 1, 3, 2, 1};
  const auto m = kmeans_1d(v, 3, 5);
  EXPECT_EQ(m.objective, 0.0);
  std::set<double> c(m.centroids.begin(), m.centroids.end());
  EXPECT_EQ(c, (std::set<double>{1, 2, 3}));
}

TEST(KMeans, ContiguousOptimum) {
  const std::vector<double> v{0.50, 0.49, 0.01, 0.00};
  // Oracle: every contiguous 2-partition of the sorted points.
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  double best = 1e300;
  std::size_t best_cut = 0;
  for (std::size_t cut = 1; cut < s.size(); ++cut) {
    auto sse = [&](std::size_t a, std::size_t b) {
      double mu = 0;
      for (std::size_t i = a; i < b; ++i) mu += s[i];
      mu /= static_cast<double>(b - a);
      double e = 0;
      for (std::size_t i = a; i < b; ++i) e += (s[i] - mu) * (s[i] - mu);
      return e;
    };
    const double obj = sse(0, cut) + sse(cut, s.size());
    if (obj < best) best = obj, best_cut = cut;
  }
  ASSERT_EQ(best_cut, 2u);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = kmeans_1d(v, 2, seed);
    EXPECT_EQ(m.assignment[0], m.assignment[1]);
    EXPECT_EQ(m.assignment[2], m.assignment[3]);
    EXPECT_NE(m.assignment[0], m.assignment[2]);
    EXPECT_NEAR(m.objective, best, 1e-15);
  }
}

TEST(KMeans, LloydObjectiveNeverIncreases) {
  Rng rng(123);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> nk(2, 12), nn(12, 80);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v(static_cast<std::size_t>(nn(rng)));
    for (auto& x : v) x = std::pow(u(rng), 3);
    const auto m = kmeans_1d(v, static_cast<std::size_t>(nk(rng)), rep);
    for (std::size_t i = 1; i < m.objective_history.size(); ++i)
      EXPECT_LE(m.objective_history[i], m.objective_history[i - 1] + 1e-15);
    // Converged: nobody is strictly closer to another centroid.
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double own = std::fabs(v[i] - m.centroids[m.assignment[i]]);
      for (double c : m.centroids) EXPECT_GE(std::fabs(v[i] - c), own - 1e-15);
    }
  }
}

TEST(KMeans, ReducesKWithWarning) {
  const std::vector<double> v{1, 1, 2};
  const auto m = kmeans_1d(v, 5, 1);
  EXPECT_EQ(m.k, 2u);
  ASSERT_EQ(m.warnings.size(), 1u);
  EXPECT_THROW(kmeans_1d(v, 0, 1), ValidationError);
}

TEST(KMeans, TwentyClustersOnSixtySixValues) {
  Rng rng(7);
  std::exponential_distribution<double> e(30.0);
  std::vector<double> v(66);
  for (auto& x : v) x = e(rng);
  const auto a = kmeans_1d(v, 20, 7), b = kmeans_1d(v, 20, 7);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.centroids, b.centroids);
  std::set<std::size_t> used(a.assignment.begin(), a.assignment.end());
  EXPECT_EQ(used.size(), 20u);
}

namespace {

ImportanceProfile profile(std::vector<double> s) { return normalize_profile(std::move(s)); }

}  // namespace

TEST(ClusterImportance, SingleImportantFeature) {
  const auto rep = cluster_importance(profile({0, 0, 1, 0, 0}), 2, 1);
  ASSERT_EQ(rep.ranked_clusters.size(), 2u);
  EXPECT_EQ(rep.ranked_clusters[0].rank, 1u);
  EXPECT_EQ(rep.ranked_clusters[0].members, (std::vector<std::size_t>{2}));
  EXPECT_DOUBLE_EQ(rep.ranked_clusters[0].aggregated_importance, 1.0);
}

TEST(ClusterImportance, PartitionIdentity) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(40);
  for (auto& x : s) x = u(rng) * u(rng);
  const auto p = profile(s);
  const auto rep = cluster_importance(p, 8, 2);
  double total = 0;
  std::vector<int> seen(40, 0);
  for (std::size_t i = 0; i < rep.ranked_clusters.size(); ++i) {
    const auto& c = rep.ranked_clusters[i];
    total += c.aggregated_importance;
    for (auto m : c.members) seen[m]++;
    for (std::size_t j = 1; j < c.members.size(); ++j)
      EXPECT_GE(p.scores[c.members[j - 1]], p.scores[c.members[j]]);
    if (i) {
      EXPECT_GE(rep.ranked_clusters[i - 1].aggregated_importance, c.aggregated_importance);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  for (int v : seen) EXPECT_EQ(v, 1);
}

TEST(ClusterImportance, ScaleEquivariant) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(30);
  for (auto& x : s) x = u(rng);
  ImportanceProfile a{s, false}, b{s, false};
  for (auto& x : b.scores) x *= 4.0;
  const auto ra = cluster_importance(a, 6, 3), rb = cluster_importance(b, 6, 3);
  ASSERT_EQ(ra.ranked_clusters.size(), rb.ranked_clusters.size());
  for (std::size_t i = 0; i < ra.ranked_clusters.size(); ++i) {
    EXPECT_EQ(ra.ranked_clusters[i].members, rb.ranked_clusters[i].members);
    EXPECT_NEAR(rb.ranked_clusters[i].centroid, 4.0 * ra.ranked_clusters[i].centroid, 1e-12);
  }
}

TEST(ClusterImportance, TiesRankByLowestMember) {
  const auto rep = cluster_importance(profile({0.25, 0.5, 0.25}), 2, 9);
  ASSERT_EQ(rep.ranked_clusters.size(), 2u);
  // {1} and {0,2} both aggregate 0.5; the cluster holding feature 0 ranks first.
  EXPECT_EQ(rep.ranked_clusters[0].members, (std::vector<std::size_t>{0, 2}));
}

TEST(ClusterImportance, AllZeroProfileRejected) {
  EXPECT_THROW(cluster_importance(ImportanceProfile{{0, 0}, false}, 2, 1), ValidationError);
}

TEST(Heatmap, OneLitCellPerRow) {
  const auto p = profile({0.6, 0.3, 0.1});
  const std::vector<ClusterReport> reps{cluster_importance(p, 3, 1)};
  const std::vector<ImportanceProfile> profs{p};
  const auto t = build_heatmap(reps, profs, {"a", "b", "c"});
  ASSERT_EQ(t.n_rows(), 3u);
  ASSERT_EQ(t.n_cols(), 3u);
  EXPECT_EQ(t.row_names, (std::vector<std::string>{"a", "b", "c"}));
  for (std::size_t r = 0; r < 3; ++r) {
    int lit = 0;
    for (std::size_t c = 0; c < 3; ++c) lit += t.at(r, c) != 0.0;
    EXPECT_EQ(lit, 1);
  }
  // Highest importance sits in rank-1 column.
  EXPECT_DOUBLE_EQ(t.at(0, 0), 0.6);
}

TEST(Heatmap, IdenticalFoldsGiveIdenticalBlocks) {
  const auto p = profile({0.1, 0.4, 0.2, 0.3});
  const auto rep = cluster_importance(p, 2, 1);
  const std::vector<ClusterReport> reps{rep, rep};
  const std::vector<ImportanceProfile> profs{p, p};
  const auto t = build_heatmap(reps, profs, {"a", "b", "c", "d"});
  ASSERT_EQ(t.n_cols(), 4u);
  EXPECT_EQ(t.row_names.front(), "b");
  for (std::size_t r = 0; r < t.n_rows(); ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(t.at(r, c), t.at(r, c + 2));
}

TEST(Heatmap, MismatchedFeatureSetsRejected) {
  const auto p = profile({0.5, 0.5});
  const auto q = profile({0.2, 0.3, 0.5});
  const std::vector<ClusterReport> reps{cluster_importance(p, 2, 1), cluster_importance(q, 2, 1)};
  const std::vector<ImportanceProfile> profs{p, q};
  EXPECT_THROW(build_heatmap(reps, profs, {"a", "b"}), ValidationError);
}

TEST(Heatmap, CsvLayout) {
  const auto p = profile({0.75, 0.25});
  const std::vector<ClusterReport> reps{cluster_importance(p, 2, 1)};
  const std::vector<ImportanceProfile> profs{p};
  std::ostringstream os;
  write_heatmap_csv(os, build_heatmap(reps, profs, {"a", "b"}));
  EXPECT_EQ(os.str(),
            "feature,mean_importance,fold1_cluster1,fold1_cluster2\n"
            "a,0.75,0.75,0\n"
            "b,0.25,0,0.25\n");
}

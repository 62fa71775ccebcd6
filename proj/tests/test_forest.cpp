#include <gtest/gtest.h>

#include <algorithm>

#include "helpers.hpp"

using namespace icui;
using test::leaf;
using test::matrix;
using test::split;

TEST(Gini, FixedValues) {
  EXPECT_DOUBLE_EQ(gini({2, 2}), 0.5);
  EXPECT_DOUBLE_EQ(gini({4, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gini({1, 3}), 0.375);
  EXPECT_THROW(gini({0, 0}), ValidationError);
}

TEST(Gini, SymmetricAndPeaksAtBalance) {
  for (int a = 0; a <= 10; ++a)
    for (int b = 0; b <= 10; ++b) {
      if (a + b == 0) continue;
      EXPECT_DOUBLE_EQ(gini({a, b}), gini({b, a}));
      EXPECT_LE(gini({a, b}), gini({a + b, a + b}) + 1e-15);
    }
}

TEST(ImpurityDecrease, FixedValues) {
  EXPECT_DOUBLE_EQ(impurity_decrease({2, 2}, {2, 0}, {0, 2}), 0.5);
  EXPECT_DOUBLE_EQ(impurity_decrease({3, 1}, {2, 0}, {1, 1}), 0.125);
  EXPECT_THROW(impurity_decrease({2, 2}, {2, 2}, {0, 0}), ValidationError);
  EXPECT_THROW(impurity_decrease({2, 2}, {1, 0}, {0, 2}), ValidationError);
}

namespace {

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// Exhaustive Δi over every numeric midpoint of every feature.
double best_decrease_bruteforce(const FeatureMatrix& x, const std::vector<std::uint8_t>& y) {
  ClassCounts parent{0, 0};
  for (auto v : y) ++parent[v];
  double best = 0.0;
  for (std::size_t f = 0; f < x.n_features; ++f) {
    std::vector<double> vals;
    for (std::size_t r = 0; r < x.n_rows; ++r) vals.push_back(x.at(r, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double t = (vals[i] + vals[i + 1]) / 2;
      ClassCounts l{0, 0}, r{0, 0};
      for (std::size_t k = 0; k < x.n_rows; ++k) ++(x.at(k, f) <= t ? l : r)[y[k]];
      best = std::max(best, impurity_decrease(parent, l, r));
    }
  }
  return best;
}

}  // namespace

TEST(BestSplit, PerfectSeparator) {
  const auto x = matrix({{0.0, 5.0}, {1.0, 3.0}, {2.0, 5.0}, {3.0, 3.0}});
  const std::vector<std::uint8_t> y{0, 0, 1, 1};
  const std::vector<std::size_t> feats{0, 1};
  const auto s = best_split(iota_rows(4), feats, x, y);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  EXPECT_DOUBLE_EQ(s->threshold, 1.5);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, 0.5);
  EXPECT_EQ(s->left, (ClassCounts{2, 0}));
}

TEST(BestSplit, IdenticalRowsGiveNone) {
  const auto x = matrix({{1, 2}, {1, 2}, {1, 2}, {1, 2}});
  const std::vector<std::uint8_t> y{0, 1, 0, 1};
  const std::vector<std::size_t> feats{0, 1};
  EXPECT_FALSE(best_split(iota_rows(4), feats, x, y));
}

TEST(BestSplit, TieGoesToLowerFeature) {
  // Feature 1 is a mirrored copy of feature 0: every split has a twin.
  const auto x = matrix({{1, 8}, {2, 7}, {3, 6}, {4, 5}, {5, 4}, {6, 3}});
  const std::vector<std::uint8_t> y{0, 1, 0, 1, 1, 1};
  const std::vector<std::size_t> feats{1, 0};
  const auto s = best_split(iota_rows(6), feats, x, y);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, best_decrease_bruteforce(x, y));
}

TEST(BestSplit, MatchesBruteForceOnRandomData) {
  Rng rng(11);
  std::uniform_int_distribution<int> v(0, 6), b(0, 1);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::vector<double>> rows(30, std::vector<double>(3));
    std::vector<std::uint8_t> y(30);
    for (auto& r : rows)
      for (auto& c : r) c = v(rng);
    for (auto& l : y) l = static_cast<std::uint8_t>(b(rng));
    const auto x = matrix(rows);
    const std::vector<std::size_t> feats{0, 1, 2};
    const auto s = best_split(iota_rows(30), feats, x, y);
    const auto ranks = rank_features(x);
    const auto s2 = best_split(iota_rows(30), feats, x, y, 1, &ranks);
    const double oracle = best_decrease_bruteforce(x, y);
    if (oracle <= 0) {
      EXPECT_FALSE(s);
      continue;
    }
    ASSERT_TRUE(s && s2);
    EXPECT_NEAR(s->impurity_decrease, oracle, 1e-12);
    EXPECT_EQ(s->feature, s2->feature);
    EXPECT_EQ(s->threshold, s2->threshold);
  }
}

TEST(BestSplit, CategoricalOneVsRest) {
  auto x = matrix({{0}, {1}, {2}, {0}, {1}, {2}});
  x.kinds[0] = ColumnKind::categorical;
  x.n_categories[0] = 3;
  const std::vector<std::uint8_t> y{0, 1, 0, 0, 1, 0};
  const std::vector<std::size_t> feats{0};
  const auto s = best_split(iota_rows(6), feats, x, y);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->kind, ColumnKind::categorical);
  EXPECT_EQ(s->threshold, 1.0);
  EXPECT_DOUBLE_EQ(s->impurity_decrease, gini({4, 2}));
}

TEST(FitTree, PureRowsGiveSingleLeaf) {
  const auto x = matrix({{1}, {2}, {3}});
  const std::vector<std::uint8_t> y{1, 1, 1};
  ForestParams p;
  p.min_samples_leaf = 1;
  Rng rng(1);
  const auto t = fit_tree(iota_rows(3), x, y, p, rng);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_TRUE(t.nodes[0].is_leaf());
  EXPECT_EQ(t.nodes[0].value, 1.0);
}

TEST(FitTree, DepthOneIsAStump) {
  const auto x = matrix({{1}, {2}, {3}, {4}, {5}, {6}});
  const std::vector<std::uint8_t> y{0, 1, 0, 1, 1, 1};
  ForestParams p;
  p.min_samples_leaf = 1;
  p.max_depth = 1;
  Rng rng(1);
  const auto t = fit_tree(iota_rows(6), x, y, p, rng);
  EXPECT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.depth(), 1);
}

TEST(FitTree, DepthTwoFixtureLayout) {
  // Hand-run greedy growth: root x0 <= 2.5 (Δi 1/6), then x1 <= 0.5 on the
  // right child (Δi 2/9).
  const auto x = matrix({{1, 1}, {2, 0}, {3, 1}, {4, 0}, {5, 1}, {6, 0}, {7, 1}, {8, 0}});
  const std::vector<std::uint8_t> y{0, 0, 1, 0, 1, 1, 1, 0};
  ForestParams p;
  p.min_samples_leaf = 1;
  p.max_depth = 2;
  p.mtry = 2;
  Rng rng(1);
  const auto t = fit_tree(iota_rows(8), x, y, p, rng);
  ASSERT_EQ(t.nodes.size(), 5u);
  const TreeNode& root = t.nodes[0];
  EXPECT_EQ(root.feature, 0);
  EXPECT_EQ(root.threshold, 2.5);
  EXPECT_EQ(root.n_samples, 8);
  EXPECT_NEAR(root.impurity_decrease, 1.0 / 6.0, 1e-15);
  const TreeNode& l = t.nodes[root.left];
  EXPECT_TRUE(l.is_leaf());
  EXPECT_EQ(l.n_samples, 2);
  EXPECT_EQ(l.value, 0.0);
  const TreeNode& r = t.nodes[root.right];
  EXPECT_EQ(r.feature, 1);
  EXPECT_EQ(r.threshold, 0.5);
  EXPECT_EQ(r.n_samples, 6);
  EXPECT_NEAR(r.impurity_decrease, 2.0 / 9.0, 1e-15);
  const TreeNode& rl = t.nodes[r.left];
  const TreeNode& rr = t.nodes[r.right];
  EXPECT_EQ(rl.class_counts, (std::array<std::int64_t, 2>{2, 1}));
  EXPECT_EQ(rr.class_counts, (std::array<std::int64_t, 2>{0, 3}));
  EXPECT_NEAR(rl.value, 1.0 / 3.0, 1e-15);
}

namespace {

Dataset planted(std::size_t n, std::uint64_t seed) {
  SynthSpec s;
  s.n_rows = n;
  s.n_features = 20;
  s.n_signal = 4;
  s.seed = seed;
  return apply_preprocess(synth_generate(s).data, preset_plan("dataset2"));
}

}  // namespace

TEST(FitForest, SingleTreeWithoutBootstrapEqualsFitTree) {
  const Dataset ds = planted(300, 2);
  const auto x = to_feature_matrix(ds);
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  const ForestModel m = fit_forest(x, ds.labels, p, 5);
  Rng rng = make_rng(5, "forest-tree", 0);
  const DecisionTree t = fit_tree(iota_rows(ds.n_rows), x, ds.labels, p, rng);
  EXPECT_EQ(model_to_json(m)["trees"][0].dump(), detail::tree_json(t).dump());
}

TEST(FitForest, DeterministicAcrossRunsAndThreads) {
  const Dataset ds = planted(400, 3);
  ForestParams p;
  p.n_trees = 20;
  set_thread_count(1);
  const std::string a = model_to_json(fit_forest(ds, p, 9)).dump();
  set_thread_count(4);
  const std::string b = model_to_json(fit_forest(ds, p, 9)).dump();
  set_thread_count(-1);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, model_to_json(fit_forest(ds, p, 10)).dump());
}

TEST(FitForest, TrainBeatsHoldoutBeatsChance) {
  const Dataset all = planted(3000, 7);
  std::vector<std::size_t> a(1500), b(1500);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 1500);
  const Dataset tr = select_rows(all, a), ho = select_rows(all, b);
  ForestParams p;
  p.n_trees = 50;
  const ForestModel m = fit_forest(tr, p, 7);
  const double train_auc = auroc(predict_proba_forest(m, to_feature_matrix(tr)), tr.labels).auc;
  const double hold_auc = auroc(predict_proba_forest(m, to_feature_matrix(ho)), ho.labels).auc;
  EXPECT_GT(train_auc, hold_auc);
  EXPECT_GT(hold_auc, 0.5);
}

TEST(FitForest, RejectsMissingCells) {
  SynthSpec s;
  s.n_rows = 100;
  s.n_features = 6;
  s.n_signal = 2;
  s.missing_rate = 0.1;
  const Dataset ds = apply_preprocess(synth_generate(s).data, preset_plan("dataset2"));
  try {
    fit_forest(ds, ForestParams{}, 1);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("impute"), std::string::npos);
  }
}

TEST(FitForest, TreeInvariants) {
  const Dataset ds = planted(500, 4);
  ForestParams p;
  p.n_trees = 10;
  const ForestModel m = fit_forest(ds, p, 1);
  for (const auto& t : m.trees) {
    EXPECT_EQ(t.nodes[0].n_samples, static_cast<std::int64_t>(ds.n_rows));
    for (const auto& n : t.nodes) {
      EXPECT_GE(n.impurity, 0.0);
      EXPECT_LE(n.impurity, 0.5);
      if (n.is_leaf()) continue;
      EXPECT_GE(n.impurity_decrease, 0.0);
      EXPECT_EQ(n.n_samples, t.nodes[n.left].n_samples + t.nodes[n.right].n_samples);
      EXPECT_LT(static_cast<std::size_t>(n.feature), m.n_features);
    }
  }
}

namespace {

ForestModel forest_of(std::vector<DecisionTree> trees, std::size_t n_features) {
  ForestModel m;
  m.trees = std::move(trees);
  m.n_features = n_features;
  m.params.n_trees = static_cast<int>(m.trees.size());
  return m;
}

}  // namespace

TEST(Predict, LeafAveraging) {
  DecisionTree pos{{leaf(1.0, 4, 4)}};
  DecisionTree neg{{leaf(0.0, 4, 0)}};
  const auto x = matrix({{0.0}});
  EXPECT_EQ(predict_proba_forest(forest_of({pos}, 1), x)[0], 1.0);
  EXPECT_EQ(predict_proba_forest(forest_of({pos, neg}, 1), x)[0], 0.5);
}

TEST(Predict, ThreeStumps) {
  DecisionTree t1{{split(0, 0.5, 1, 2, 10), leaf(0.2, 5, 1), leaf(0.8, 5, 4)}};
  DecisionTree t2{{split(1, 0.5, 1, 2, 10), leaf(0.0, 5, 0), leaf(1.0, 5, 5)}};
  DecisionTree t3{{leaf(0.6, 10, 6)}};
  const auto m = forest_of({t1, t2, t3}, 2);
  const auto p = predict_proba_forest(m, matrix({{1.0, 0.0}, {0.0, 1.0}}));
  EXPECT_NEAR(p[0], (0.8 + 0.0 + 0.6) / 3.0, 1e-15);
  EXPECT_NEAR(p[1], (0.2 + 1.0 + 0.6) / 3.0, 1e-15);
  EXPECT_THROW(predict_proba_forest(m, matrix({{1.0}})), ValidationError);
}

TEST(Importance, StumpConcentratesOnItsFeature) {
  DecisionTree t{{split(3, 0.5, 1, 2, 10, 5, 0.5), leaf(0, 5), leaf(1, 5, 5)}};
  const auto prof = forest_importance(forest_of({t}, 5));
  EXPECT_TRUE(prof.normalized);
  EXPECT_EQ(prof.scores, (std::vector<double>{0, 0, 0, 1, 0}));
}

TEST(Importance, TwoTreeFixture) {
  // Tree A: root (N 10) on x0 with Δi 0.2; child (N 6) on x1 with Δi 0.1.
  // Tree B: root (N 10) on x1 with Δi 0.3.
  DecisionTree a{{split(0, 0.5, 1, 2, 10, 5, 0.2), leaf(0, 4), split(1, 0.5, 3, 4, 6, 5, 0.1),
                  leaf(0.5, 2, 1), leaf(1, 4, 4)}};
  DecisionTree b{{split(1, 0.5, 1, 2, 10, 5, 0.3), leaf(0, 5), leaf(1, 5, 5)}};
  const auto m = forest_of({a, b}, 3);
  const auto raw = forest_importance_raw(m);
  EXPECT_NEAR(raw[0], 0.5 * (10.0 / 10.0 * 0.2), 1e-15);
  EXPECT_NEAR(raw[1], 0.5 * (6.0 / 10.0 * 0.1 + 10.0 / 10.0 * 0.3), 1e-15);
  EXPECT_EQ(raw[2], 0.0);
  const auto prof = forest_importance(m);
  EXPECT_NEAR(prof.scores[0], 0.1 / 0.28, 1e-12);
  EXPECT_NEAR(prof.scores[1], 0.18 / 0.28, 1e-12);
  EXPECT_NEAR(prof.scores[0] + prof.scores[1] + prof.scores[2], 1.0, 1e-12);
}

TEST(Importance, AllLeafForestIsZeroAndUnnormalized) {
  const auto prof = forest_importance(forest_of({DecisionTree{{leaf(0.3, 10, 3)}}}, 4));
  EXPECT_FALSE(prof.normalized);
  EXPECT_EQ(prof.scores, (std::vector<double>(4, 0.0)));
}

TEST(Importance, FittedProfileSumsToOne) {
  const Dataset ds = planted(500, 5);
  ForestParams p;
  p.n_trees = 20;
  const auto prof = forest_importance(fit_forest(ds, p, 3));
  double total = 0;
  for (double s : prof.scores) {
    EXPECT_GE(s, 0.0);
    total += s;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Importance, ArgmaxStableUnderNoisePermutation) {
  Dataset ds = planted(1500, 7);
  ForestParams p;
  p.n_trees = 60;
  const auto base = forest_importance(fit_forest(ds, p, 7)).scores;
  const auto top = std::max_element(base.begin(), base.end()) - base.begin();
  // Last numeric column carries no signal.
  Column& noise = ds.columns[15];
  ASSERT_EQ(noise.spec.kind, ColumnKind::numeric);
  Rng rng(99);
  std::shuffle(noise.numeric.begin(), noise.numeric.end(), rng);
  const auto perm = forest_importance(fit_forest(ds, p, 7)).scores;
  EXPECT_EQ(std::max_element(perm.begin(), perm.end()) - perm.begin(), top);
}

TEST(ModelIo, ForestRoundTripPredictsIdentically) {
  const Dataset ds = planted(300, 6);
  ForestParams p;
  p.n_trees = 5;
  const ForestModel m = fit_forest(ds, p, 2);
  const auto back = std::get<ForestModel>(model_from_json(nlohmann::json::parse(model_to_json(m).dump())));
  const auto x = to_feature_matrix(ds);
  EXPECT_EQ(predict_proba_forest(m, x), predict_proba_forest(back, x));
  EXPECT_EQ(model_to_json(back).dump(), model_to_json(m).dump());
}

TEST(ModelIo, RejectsForeignDocuments) {
  EXPECT_THROW(model_from_json(nlohmann::json{{"format", "other"}}), ValidationError);
  EXPECT_THROW(model_from_json(nlohmann::json::array()), ValidationError);
}

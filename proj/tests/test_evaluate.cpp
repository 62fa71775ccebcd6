#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace icui;

namespace {

double concordance(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double num = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!(y[i] == 1 && y[j] == 0)) continue;
      pairs += 1;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return num / pairs;
}

double trapezoid(const std::vector<CurvePoint>& pts) {
  double a = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    a += (pts[i].x - pts[i - 1].x) * (pts[i].y + pts[i - 1].y) / 2;
  return a;
}

}  // namespace

TEST(Auroc, FixedValues) {
  const std::vector<std::uint8_t> y{0, 0, 1, 1};
  EXPECT_EQ(auroc(std::vector<double>{0, 0, 1, 1}, y).auc, 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, y).auc, 0.5);
  EXPECT_EQ(auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, y).auc, 0.75);
}

TEST(Auroc, Errors) {
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}), ValidationError);
  EXPECT_THROW(auroc(std::vector<double>{0.1}, std::vector<std::uint8_t>{1, 0}), ValidationError);
  EXPECT_THROW(auroc(std::vector<double>{std::nan(""), 0.2}, std::vector<std::uint8_t>{1, 0}),
               ValidationError);
}

TEST(Auroc, MatchesConcordanceOnRandomInstances) {
  Rng rng(2024);
  std::uniform_int_distribution<int> n_dist(2, 200), level(0, 9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = static_cast<std::size_t>(n_dist(rng));
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rep % 2 ? level(rng) / 10.0 : u(rng);  // half the instances have heavy ties
      y[i] = u(rng) < 0.3;
    }
    y[0] = 1;
    y[1] = 0;
    const auto r = auroc(s, y);
    EXPECT_NEAR(r.auc, concordance(s, y), 1e-12);
    EXPECT_NEAR(trapezoid(r.points), r.auc, 1e-12);
  }
}

TEST(Auroc, SignFlipAndMonotoneInvariance) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(150), neg(150), mono(150);
  std::vector<std::uint8_t> y(150);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    neg[i] = -s[i];
    mono[i] = std::exp(3 * s[i]) + s[i] * s[i] * s[i];
    y[i] = u(rng) < s[i];
  }
  EXPECT_NEAR(auroc(s, y).auc + auroc(neg, y).auc, 1.0, 1e-12);
  EXPECT_EQ(auroc(mono, y).auc, auroc(s, y).auc);
}

TEST(Auroc, CurveIsMonotone) {
  Rng rng(8);
  std::uniform_int_distribution<int> level(0, 5);
  std::vector<double> s(80);
  std::vector<std::uint8_t> y(80);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = level(rng);
    y[i] = (i % 3) == 0;
  }
  const auto r = auroc(s, y);
  EXPECT_EQ(r.points.front().x, 0.0);
  EXPECT_EQ(r.points.front().y, 0.0);
  EXPECT_EQ(r.points.back().x, 1.0);
  EXPECT_EQ(r.points.back().y, 1.0);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    EXPECT_GE(r.points[i].x, r.points[i - 1].x);
    EXPECT_GE(r.points[i].y, r.points[i - 1].y);
  }
}

TEST(Auprc, FixedValues) {
  EXPECT_EQ(auprc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<std::uint8_t>{1, 1, 0, 0})
                .average_precision,
            1.0);
  EXPECT_NEAR(auprc(std::vector<double>{0.9, 0.8, 0.7}, std::vector<std::uint8_t>{1, 0, 1})
                  .average_precision,
              0.5 + (2.0 / 3.0) * 0.5, 1e-15);
  EXPECT_THROW(auprc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{0, 0}), ValidationError);
}

TEST(Auprc, ConstantScorerGivesPrevalenceExactly) {
  for (std::size_t n : {7u, 20u, 33u}) {
    std::vector<double> s(n, 0.4);
    std::vector<std::uint8_t> y(n, 0);
    for (std::size_t i = 0; i < n; i += 3) y[i] = 1;
    std::size_t pos = 0;
    for (auto v : y) pos += v;
    EXPECT_EQ(auprc(s, y).average_precision, static_cast<double>(pos) / static_cast<double>(n));
  }
}

TEST(Auprc, CurveSpansRecall) {
  const auto r = auprc(std::vector<double>{0.9, 0.5, 0.5, 0.1}, std::vector<std::uint8_t>{1, 0, 1, 0});
  EXPECT_EQ(r.points.front().x, 0.0);
  EXPECT_EQ(r.points.back().x, 1.0);
  EXPECT_NEAR(r.average_precision, 0.5 * 1.0 + 0.5 * (2.0 / 3.0), 1e-15);
}

TEST(Aggregate, Formatting) {
  std::vector<double> a{0.9, 0.9, 0.9};
  EXPECT_EQ(aggregate(a).text, "0.900 ± 0.000");
  std::vector<double> b{0.8, 1.0};
  const auto g = aggregate(b);
  EXPECT_NEAR(g.mean, 0.9, 1e-15);
  EXPECT_NEAR(g.std, std::sqrt(0.02), 1e-15);
  EXPECT_EQ(g.text, "0.900 ± 0.141");
  std::vector<double> c{0.9115, 0.9115};
  EXPECT_EQ(aggregate(c).text.substr(0, 5), "0.912");
  std::vector<double> d{0.9};
  EXPECT_THROW(aggregate(d), ValidationError);
}

namespace {

Dataset planted(std::size_t n, std::uint64_t seed) {
  SynthSpec s;
  s.n_rows = n;
  s.n_features = 10;
  s.n_signal = 4;
  s.seed = seed;
  return apply_preprocess(synth_generate(s).data, preset_plan("dataset2"));
}

ModelSpec small_rf() {
  ModelSpec m;
  m.kind = ModelKind::rf;
  m.forest.n_trees = 10;
  return m;
}

}  // namespace

TEST(RunCv, FoldGeometry) {
  const Dataset ds = planted(100, 1);
  CvOptions opt;
  opt.k_clusters = 5;
  opt.seed = 3;
  const auto r = run_cv(ds, small_rf(), opt);
  ASSERT_EQ(r.summary.folds.size(), 5u);
  std::size_t total = 0;
  for (const auto& f : r.summary.folds) {
    EXPECT_EQ(f.n_test, 20u);
    total += f.n_test;
  }
  EXPECT_EQ(total, 100u);
  EXPECT_DOUBLE_EQ(r.summary.baseline, prevalence(ds.labels));
  ASSERT_EQ(r.folds.size(), 5u);
  for (const auto& f : r.folds) {
    ASSERT_TRUE(f.importance && f.clusters);
    EXPECT_EQ(f.clusters->ranked_clusters.size(), 5u);
  }
}

TEST(RunCv, DeterministicSummary) {
  const Dataset ds = planted(300, 2);
  CvOptions opt;
  opt.seed = 5;
  ModelSpec b;
  b.kind = ModelKind::boosted;
  b.boost.n_rounds = 10;
  const auto x = summary_json(run_cv(ds, b, opt).summary).dump();
  const auto y = summary_json(run_cv(ds, b, opt).summary).dump();
  EXPECT_EQ(x, y);
}

TEST(RunCv, BoostedAttributesTestRows) {
  const Dataset ds = planted(200, 3);
  CvOptions opt;
  opt.seed = 1;
  opt.k_clusters = 4;
  ModelSpec b;
  b.kind = ModelKind::boosted;
  b.boost.n_rounds = 5;
  const auto r = run_cv(ds, b, opt);
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    ASSERT_TRUE(r.folds[f].attribution);
    const auto& a = *r.folds[f].attribution;
    EXPECT_EQ(a.n_rows, r.summary.folds[f].n_test);
    EXPECT_EQ(a.output_space, OutputSpace::margin);
  }
}

TEST(RunCv, SingleClassFoldIsFlaggedNotFatal) {
  // Only two positives: with k=5 most test folds hold a single class.
  Dataset ds = planted(50, 4);
  std::fill(ds.labels.begin(), ds.labels.end(), 0);
  ds.labels[3] = ds.labels[17] = 1;
  CvOptions opt;
  opt.k_clusters = 3;
  opt.seed = 2;
  ModelSpec m = small_rf();
  m.forest.min_samples_leaf = 1;
  const auto r = run_cv(ds, m, opt);
  int flagged = 0;
  for (const auto& f : r.summary.folds) {
    if (!f.flagged) continue;
    ++flagged;
    EXPECT_FALSE(f.error.empty());
  }
  EXPECT_GE(flagged, 3);
  const auto j = summary_json(r.summary);
  EXPECT_TRUE(j["folds"][0].contains("flagged"));
}

TEST(RunCv, ImputationIsFitPerTrainingSplit) {
  SynthSpec s;
  s.n_rows = 240;
  s.n_features = 6;
  s.n_signal = 2;
  s.missing_rate = 0.05;
  s.seed = 6;
  const Dataset ds = apply_preprocess(synth_generate(s).data, preset_plan("dataset2"));
  CvOptions opt;
  opt.k = 3;
  opt.k_clusters = 3;
  opt.seed = 4;
  ImputeConfig ic;
  ic.algorithm = "A0";
  opt.impute = ic;
  const auto prepared = prepare_folds(ds, opt);
  ASSERT_EQ(prepared.size(), 3u);
  for (const auto& p : prepared) {
    EXPECT_FALSE(p.train.has_missing());
    EXPECT_FALSE(p.test.has_missing());
    EXPECT_EQ(p.train.n_rows + p.test.n_rows, ds.n_rows);
  }
  const auto r = run_cv(prepared, small_rf(), opt, prevalence(ds.labels), ds.column_names());
  EXPECT_TRUE(r.summary.auroc.has_value());
}

TEST(CurveCsv, Layout) {
  std::ostringstream os;
  write_curve_csv(os, {{0, 0}, {0.5, 1}}, "fpr", "tpr");
  EXPECT_EQ(os.str(), "fpr,tpr\n0,0\n0.5,1\n");
}

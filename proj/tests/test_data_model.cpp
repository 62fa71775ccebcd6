#include <gtest/gtest.h>

#include <cstring>
#include <set>

#include "helpers.hpp"

using namespace icui;
using icui::test::parse;

TEST(LoadCsv, EmptyCellIsMissing) {
  const Dataset ds = parse("a,b,icu_death\n1,2,0\n3,,1\n5,6,0\n");
  ASSERT_EQ(ds.n_rows, 3u);
  const Column& b = ds.column("b");
  EXPECT_EQ(b.missing[1], 1);
  EXPECT_EQ(b.missing[0], 0);
  EXPECT_EQ(b.missing_count(), 1u);
  EXPECT_EQ(ds.labels, (std::vector<std::uint8_t>{0, 1, 0}));
}

TEST(LoadCsv, InfersKinds) {
  const Dataset ds = parse("a,b,icu_death\n1,x,0\n2,y,1\n");
  EXPECT_EQ(ds.column("a").spec.kind, ColumnKind::numeric);
  EXPECT_EQ(ds.column("b").spec.kind, ColumnKind::categorical);
  EXPECT_EQ(ds.column("b").dictionary, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(ds.column("icu_death").spec.role, ColumnRole::label);
}

TEST(LoadCsv, RaggedRowNamesRow) {
  try {
    parse("a,b,icu_death\n1,2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 1u);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(LoadCsv, QuotedFieldsAndCrlf) {
  const Dataset ds = parse("a,b,icu_death\r\n1,\"x, y\",0\r\n2,\"he said \"\"hi\"\"\",1\r\n");
  EXPECT_EQ(ds.column("b").dictionary[0], "x, y");
  EXPECT_EQ(ds.column("b").dictionary[1], "he said \"hi\"");
}

TEST(LoadCsv, BadLabelIsRejected) {
  EXPECT_THROW(parse("a,icu_death\n1,2\n"), ValidationError);
  EXPECT_THROW(parse("a,icu_death\n1,\n"), ValidationError);
}

TEST(LoadCsv, MissingFileNamesPath) {
  try {
    load_csv("/nonexistent/x.csv");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.csv"), std::string::npos);
  }
}

TEST(LoadCsv, DuplicateHeaderRejected) {
  EXPECT_THROW(parse("a,a,icu_death\n1,2,0\n"), ValidationError);
}

TEST(Csv, RoundTripIsBitExact) {
  const std::string text = "a,b,c,icu_death\n0.1,x,,0\n1e-300,\"q,r\",3,1\n-2.5,,0.30000000000000004,0\n";
  const Dataset ds = parse(text);
  std::ostringstream out;
  write_csv(out, ds);
  const Dataset back = parse(out.str());
  ASSERT_EQ(back.n_rows, ds.n_rows);
  for (std::size_t c = 0; c < ds.columns.size(); ++c) {
    const Column& x = ds.columns[c];
    const Column& y = back.columns[c];
    EXPECT_EQ(x.spec.name, y.spec.name);
    EXPECT_EQ(x.missing, y.missing);
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
      if (x.missing[r]) continue;
      if (x.is_numeric())
        EXPECT_EQ(std::memcmp(&x.numeric[r], &y.numeric[r], sizeof(double)), 0);
      else
        EXPECT_EQ(x.dictionary[x.codes[r]], y.dictionary[y.codes[r]]);
    }
  }
  std::ostringstream again;
  write_csv(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Preprocess, RejectsExcludingLabel) {
  const Dataset ds = parse("a,icu_death\n1,0\n2,1\n");
  PreprocessPlan plan;
  plan.exclude = {"icu_death"};
  EXPECT_THROW(apply_preprocess(ds, plan), ValidationError);
}

TEST(Preprocess, EmptyPlanKeepsFeatures) {
  const Dataset ds = parse("a,b,icu_death\n1,x,0\n2,y,1\n");
  const Dataset out = apply_preprocess(ds, PreprocessPlan{});
  EXPECT_EQ(out.column_names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(out.labels, ds.labels);
  EXPECT_EQ(out.column("a").numeric, ds.column("a").numeric);
}

TEST(Preprocess, RenameKeepsValuesBitIdentical) {
  const Dataset ds = parse("vent,icu_death\n0.1,0\n0.7,1\n");
  PreprocessPlan plan;
  plan.rename = {{"vent", "ventilated_apache"}};
  const Dataset out = apply_preprocess(ds, plan);
  ASSERT_TRUE(out.find("ventilated_apache"));
  EXPECT_FALSE(out.find("vent"));
  const auto& a = ds.column("vent").numeric;
  const auto& b = out.column("ventilated_apache").numeric;
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(Preprocess, LeakageGuardDropsIdentifiers) {
  const Dataset ds = parse(
      "patientunitstayid,encounter_id,hospital_death,partition,x,icu_death\n"
      "1,10,0,train,0.5,0\n2,11,1,valid,0.7,1\n");
  const Dataset out = apply_preprocess(ds, preset_plan("dataset2"));
  EXPECT_EQ(out.column_names(), (std::vector<std::string>{"x"}));
  for (const auto& leak : leakage_columns()) EXPECT_FALSE(out.find(leak));
}

TEST(Preprocess, UnknownColumnsAndCollisions) {
  const Dataset ds = parse("a,b,icu_death\n1,2,0\n");
  PreprocessPlan p1;
  p1.exclude = {"zzz"};
  EXPECT_THROW(apply_preprocess(ds, p1), ValidationError);
  PreprocessPlan p2;
  p2.rename = {{"a", "b"}};
  EXPECT_THROW(apply_preprocess(ds, p2), ValidationError);
  EXPECT_THROW(preset_plan("dataset9"), ValidationError);
}

TEST(Preprocess, PlanJsonRoundTrip) {
  PreprocessPlan p;
  p.exclude = {"a"};
  p.rename = {{"b", "c"}};
  p.label_column = "y";
  const PreprocessPlan q = plan_from_json(plan_to_json(p));
  EXPECT_EQ(q.exclude, p.exclude);
  EXPECT_EQ(q.rename, p.rename);
  EXPECT_EQ(q.label_column, "y");
  EXPECT_THROW(plan_from_json(nlohmann::json{{"excludes", {"a"}}}), ValidationError);
}

TEST(DropIncomplete, RemovesOnlyIncompleteRows) {
  const Dataset ds = parse("a,b,icu_death\n1,2,0\n3,,1\n5,6,0\n7,8,1\n");
  const Dataset out = drop_incomplete_rows(apply_preprocess(ds, PreprocessPlan{}));
  EXPECT_EQ(out.n_rows, 3u);
  EXPECT_EQ(out.column("a").numeric, (std::vector<double>{1, 5, 7}));
  EXPECT_EQ(out.labels, (std::vector<std::uint8_t>{0, 0, 1}));
  EXPECT_FALSE(out.has_missing());
}

TEST(DropIncomplete, AllIncompleteIsAnError) {
  const Dataset ds = apply_preprocess(parse("a,b,icu_death\n1,,0\n,2,1\n"), PreprocessPlan{});
  try {
    drop_incomplete_rows(ds);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
  }
}

TEST(Summary, PrevalenceAndMissingRate) {
  const Dataset ds = parse("a,icu_death\n1,0\n2,0\n3,0\n4,1\n");
  EXPECT_DOUBLE_EQ(summarize(ds).prevalence, 0.25);
  const Dataset m = parse("a,icu_death\n1,0\n,0\n3,0\n4,1\n,0\n6,0\n7,0\n8,1\n");
  const auto s = summarize(apply_preprocess(m, PreprocessPlan{}));
  ASSERT_EQ(s.missing_rate.size(), 1u);
  EXPECT_DOUBLE_EQ(s.missing_rate[0].second, 0.25);
}

TEST(Folds, EvenSizes) {
  const auto fa = split_folds(10, 5, 3);
  std::vector<int> size(5, 0);
  for (auto f : fa.fold_of_row) size[f]++;
  for (int s : size) EXPECT_EQ(s, 2);
}

TEST(Folds, FirstFoldsTakeRemainder) {
  const auto fa = split_folds(11, 5, 3);
  std::vector<int> size(5, 0);
  for (auto f : fa.fold_of_row) size[f]++;
  EXPECT_EQ(size, (std::vector<int>{3, 2, 2, 2, 2}));
}

TEST(Folds, DeterministicForSeed) {
  EXPECT_EQ(split_folds(100, 5, 9).fold_of_row, split_folds(100, 5, 9).fold_of_row);
  EXPECT_NE(split_folds(100, 5, 9).fold_of_row, split_folds(100, 5, 10).fold_of_row);
  EXPECT_THROW(split_folds(3, 5, 1), ValidationError);
  EXPECT_THROW(split_folds(10, 1, 1), ValidationError);
}

TEST(Folds, StratifiedKeepsClassBalance) {
  std::vector<std::uint8_t> y(100, 0);
  for (int i = 0; i < 20; ++i) y[i * 5] = 1;
  const auto fa = split_folds_stratified(y, 5, 4);
  std::vector<int> pos(5, 0), size(5, 0);
  for (std::size_t r = 0; r < y.size(); ++r) {
    size[fa.fold_of_row[r]]++;
    pos[fa.fold_of_row[r]] += y[r];
  }
  for (int f = 0; f < 5; ++f) {
    EXPECT_EQ(size[f], 20);
    EXPECT_EQ(pos[f], 4);
  }
}

TEST(FeatureMatrix, SchemaRecodesByText) {
  const Dataset train = apply_preprocess(parse("c,icu_death\nx,0\ny,1\n"), PreprocessPlan{});
  const Dataset other = apply_preprocess(parse("c,icu_death\ny,0\nz,1\nx,0\n"), PreprocessPlan{});
  const FeatureMatrix m = to_feature_matrix(other, schema_of(train));
  EXPECT_EQ(m.at(0, 0), 1.0);
  EXPECT_EQ(m.at(1, 0), -1.0);
  EXPECT_EQ(m.at(2, 0), 0.0);
}

TEST(FeatureMatrix, MissingCellsRejected) {
  const Dataset ds = apply_preprocess(parse("a,icu_death\n1,0\n,1\n"), PreprocessPlan{});
  EXPECT_THROW(to_feature_matrix(ds), ValidationError);
}

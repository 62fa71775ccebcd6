#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "icui/common.hpp"

namespace icui {

enum class ColumnKind { numeric, categorical };
enum class ColumnRole { feature, label, excluded, identifier };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  ColumnRole role = ColumnRole::feature;
};

/// One typed column. Numeric cells live in `numeric`, categorical cells are
/// dense codes into `dictionary`; missing cells hold NaN / -1 and are flagged
/// in `missing`.
struct Column {
  ColumnSpec spec;
  std::vector<double> numeric;
  std::vector<std::int32_t> codes;
  std::vector<std::string> dictionary;
  std::vector<std::uint8_t> missing;

  bool is_numeric() const { return spec.kind == ColumnKind::numeric; }
  std::size_t size() const { return missing.size(); }

  /// Cell as a model input value (category codes widen to double).
  double value(std::size_t row) const {
    return is_numeric() ? numeric[row] : static_cast<double>(codes[row]);
  }
  std::size_t missing_count() const {
    return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), 1));
  }
};

struct Dataset {
  std::vector<Column> columns;
  std::vector<std::uint8_t> labels;  // empty when the source had no label column
  std::string label_name = "icu_death";
  std::size_t n_rows = 0;

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].spec.name == name) return i;
    return std::nullopt;
  }
  const Column& column(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw ValidationError("unknown column '" + std::string(name) + "'");
    return columns[*idx];
  }
  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.spec.name);
    return out;
  }
  bool row_complete(std::size_t row) const {
    for (const auto& c : columns)
      if (c.missing[row]) return false;
    return true;
  }
  bool has_missing() const {
    for (const auto& c : columns)
      if (c.missing_count() > 0) return true;
    return false;
  }
};

struct PreprocessPlan {
  std::vector<std::string> exclude;
  std::map<std::string, std::string> rename;
  std::string label_column = "icu_death";
};

struct DatasetSummary {
  std::size_t n_rows = 0;
  double prevalence = 0.0;
  std::vector<std::pair<std::string, double>> missing_rate;
};

struct FoldAssignment {
  std::vector<std::size_t> fold_of_row;
  std::size_t k = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> rows_in(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < fold_of_row.size(); ++r)
      if (fold_of_row[r] == fold) out.push_back(r);
    return out;
  }
  std::vector<std::size_t> rows_not_in(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < fold_of_row.size(); ++r)
      if (fold_of_row[r] != fold) out.push_back(r);
    return out;
  }
};

/// Row-major dense model input built from a complete Dataset.
struct FeatureMatrix {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::vector<double> values;
  std::vector<ColumnKind> kinds;
  std::vector<std::int32_t> n_categories;  // 0 for numeric features
  std::vector<std::string> names;

  double at(std::size_t row, std::size_t feature) const {
    return values[row * n_features + feature];
  }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * n_features, n_features};
  }
};

// ---------------------------------------------------------------------------
// CSV

namespace csv {

/// Splits one record. Quoted fields may contain commas and doubled quotes;
/// `""` and empty both read as an empty (missing) field.
inline std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << escape(fields[i]);
  }
  os << '\n';
}

}  // namespace csv

inline Dataset parse_csv(std::istream& in, const std::optional<std::vector<ColumnSpec>>& schema,
                         const std::string& label_column = "icu_death") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV: missing header row", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = csv::split_record(line);

  std::vector<std::vector<std::string>> cells(header.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    auto fields = csv::split_record(line);
    if (fields.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       row);
    for (std::size_t c = 0; c < fields.size(); ++c) cells[c].push_back(std::move(fields[c]));
  }

  Dataset ds;
  ds.n_rows = row;
  ds.label_name = label_column;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!seen.insert(header[c]).second)
      throw ValidationError("duplicate column name '" + header[c] + "'");
    Column col;
    col.spec.name = header[c];
    std::optional<ColumnSpec> given;
    if (schema) {
      for (const auto& s : *schema)
        if (s.name == header[c]) given = s;
    }
    const auto& raw = cells[c];
    col.missing.resize(row);
    for (std::size_t r = 0; r < row; ++r) col.missing[r] = raw[r].empty();

    bool numeric = true;
    if (given) {
      numeric = given->kind == ColumnKind::numeric;
      col.spec.role = given->role;
    } else {
      double tmp;
      for (std::size_t r = 0; r < row && numeric; ++r)
        if (!col.missing[r] && !parse_double(raw[r], tmp)) numeric = false;
    }
    if (header[c] == label_column) col.spec.role = ColumnRole::label;

    if (numeric) {
      col.spec.kind = ColumnKind::numeric;
      col.numeric.assign(row, std::numeric_limits<double>::quiet_NaN());
      for (std::size_t r = 0; r < row; ++r) {
        if (col.missing[r]) continue;
        if (!parse_double(raw[r], col.numeric[r]))
          throw ParseError("row " + std::to_string(r + 1) + ": column '" + header[c] +
                               "' expects a number, got '" + raw[r] + "'",
                           r + 1);
      }
    } else {
      col.spec.kind = ColumnKind::categorical;
      col.codes.assign(row, -1);
      std::unordered_map<std::string, std::int32_t> index;
      for (std::size_t r = 0; r < row; ++r) {
        if (col.missing[r]) continue;
        auto [it, inserted] =
            index.emplace(raw[r], static_cast<std::int32_t>(col.dictionary.size()));
        if (inserted) col.dictionary.push_back(raw[r]);
        col.codes[r] = it->second;
      }
    }
    ds.columns.push_back(std::move(col));
  }

  if (auto li = ds.find(label_column)) {
    const Column& lc = ds.columns[*li];
    ds.labels.resize(row);
    for (std::size_t r = 0; r < row; ++r) {
      double v = lc.is_numeric() ? lc.numeric[r] : std::nan("");
      if (lc.missing[r] || !(v == 0.0 || v == 1.0))
        throw ValidationError("row " + std::to_string(r + 1) + ": label '" + label_column +
                              "' must be 0 or 1");
      ds.labels[r] = static_cast<std::uint8_t>(v);
    }
  }
  return ds;
}

/// Reads a UTF-8, comma-separated file with one header row. Empty fields are
/// missing. Without a schema, a column is numeric iff every present cell
/// parses as a finite real.
inline Dataset load_csv(const std::string& path,
                        const std::optional<std::vector<ColumnSpec>>& schema = std::nullopt,
                        const std::string& label_column = "icu_death") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open input file '" + path + "'");
  return parse_csv(in, schema, label_column);
}

inline std::string cell_text(const Column& col, std::size_t r) {
  if (col.missing[r]) return "";
  return col.is_numeric() ? format_double(col.numeric[r]) : col.dictionary[col.codes[r]];
}

/// Writes every column; a Dataset whose label column was set aside gets the
/// labels appended under `label_name`.
inline void write_csv(std::ostream& os, const Dataset& ds) {
  std::vector<std::string> header = ds.column_names();
  const bool append_label = !ds.labels.empty() && !ds.find(ds.label_name);
  if (append_label) header.push_back(ds.label_name);
  csv::write_row(os, header);
  std::vector<std::string> fields(header.size());
  for (std::size_t r = 0; r < ds.n_rows; ++r) {
    for (std::size_t c = 0; c < ds.columns.size(); ++c) fields[c] = cell_text(ds.columns[c], r);
    if (append_label) fields.back() = ds.labels[r] ? "1" : "0";
    csv::write_row(os, fields);
  }
}

inline void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_csv(out, ds);
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Identifier and leakage columns dropped from every model input.
inline const std::vector<std::string>& leakage_columns() {
  static const std::vector<std::string> cols = {"patientunitstayid", "encounter_id",
                                                "hospital_death", "partition"};
  return cols;
}

/// Named plans. "dataset1" also maps the imputed-dataset names onto the
/// complete-case vocabulary.
inline PreprocessPlan preset_plan(std::string_view name) {
  PreprocessPlan plan;
  plan.exclude = leakage_columns();
  if (name == "dataset1") {
    plan.rename = {{"vent", "ventilated_apache"},
                   {"dx_class", "apache_2_diagnosis"},
                   {"dx_sub", "apache_3j_diagnosis"}};
  } else if (name != "dataset2") {
    throw ValidationError("unknown preset '" + std::string(name) +
                          "' (expected dataset1 or dataset2)");
  }
  return plan;
}

inline PreprocessPlan plan_from_json(const nlohmann::json& j) {
  PreprocessPlan plan;
  if (!j.is_object()) throw ValidationError("plan must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "exclude" && it.key() != "rename" && it.key() != "label")
      throw ValidationError("unknown plan key '" + it.key() + "'");
  }
  try {
    if (j.contains("exclude")) plan.exclude = j.at("exclude").get<std::vector<std::string>>();
    if (j.contains("rename"))
      plan.rename = j.at("rename").get<std::map<std::string, std::string>>();
    if (j.contains("label")) plan.label_column = j.at("label").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed plan: ") + e.what());
  }
  return plan;
}

inline nlohmann::json plan_to_json(const PreprocessPlan& plan) {
  return {{"exclude", plan.exclude}, {"rename", plan.rename}, {"label", plan.label_column}};
}

inline PreprocessPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open plan file '" + path + "'");
  try {
    return plan_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("plan file '" + path + "': " + e.what());
  }
}

/// Drops excluded, identifier and label columns, applies renames and leaves
/// a features-only Dataset whose labels come from the plan's label column.
/// With `require_label` false an absent label column leaves labels empty.
inline Dataset apply_preprocess(const Dataset& ds, const PreprocessPlan& plan,
                                bool require_label = true) {
  for (const auto& name : plan.exclude) {
    if (name == plan.label_column)
      throw ValidationError("cannot exclude the label column '" + name + "'");
    if (!ds.find(name)) throw ValidationError("plan excludes unknown column '" + name + "'");
  }
  std::set<std::string> targets;
  for (const auto& [from, to] : plan.rename) {
    if (!ds.find(from)) throw ValidationError("plan renames unknown column '" + from + "'");
    if (!targets.insert(to).second)
      throw ValidationError("rename map is not injective (target '" + to + "')");
    if (from == plan.label_column) throw ValidationError("cannot rename the label column");
  }

  Dataset out;
  out.n_rows = ds.n_rows;
  out.label_name = plan.label_column;
  if (plan.label_column == ds.label_name && !ds.labels.empty()) {
    out.labels = ds.labels;
  } else if (auto li = ds.find(plan.label_column)) {
    const Column& lc = ds.columns[*li];
    out.labels.resize(ds.n_rows);
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
      const double v = lc.is_numeric() ? lc.numeric[r] : std::nan("");
      if (lc.missing[r] || !(v == 0.0 || v == 1.0))
        throw ValidationError("row " + std::to_string(r + 1) + ": label '" +
                              plan.label_column + "' must be 0 or 1");
      out.labels[r] = static_cast<std::uint8_t>(v);
    }
  } else if (require_label) {
    throw ValidationError("label column '" + plan.label_column + "' not found");
  }

  const std::set<std::string> excluded(plan.exclude.begin(), plan.exclude.end());
  for (const auto& col : ds.columns) {
    if (col.spec.name == plan.label_column || col.spec.role == ColumnRole::label) continue;
    if (col.spec.role == ColumnRole::excluded || col.spec.role == ColumnRole::identifier)
      continue;
    if (excluded.count(col.spec.name)) continue;
    Column copy = col;
    if (auto it = plan.rename.find(col.spec.name); it != plan.rename.end())
      copy.spec.name = it->second;
    copy.spec.role = ColumnRole::feature;
    out.columns.push_back(std::move(copy));
  }
  std::set<std::string> names;
  for (const auto& c : out.columns)
    if (!names.insert(c.spec.name).second)
      throw ValidationError("rename collides with existing column '" + c.spec.name + "'");
  return out;
}

inline Dataset select_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.label_name = ds.label_name;
  out.n_rows = rows.size();
  for (const auto& col : ds.columns) {
    Column c;
    c.spec = col.spec;
    c.dictionary = col.dictionary;
    c.missing.reserve(rows.size());
    for (auto r : rows) c.missing.push_back(col.missing[r]);
    if (col.is_numeric()) {
      c.numeric.reserve(rows.size());
      for (auto r : rows) c.numeric.push_back(col.numeric[r]);
    } else {
      c.codes.reserve(rows.size());
      for (auto r : rows) c.codes.push_back(col.codes[r]);
    }
    out.columns.push_back(std::move(c));
  }
  if (!ds.labels.empty()) {
    out.labels.reserve(rows.size());
    for (auto r : rows) out.labels.push_back(ds.labels[r]);
  }
  return out;
}

inline Dataset drop_incomplete_rows(const Dataset& ds) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < ds.n_rows; ++r)
    if (ds.row_complete(r)) keep.push_back(r);
  if (keep.empty()) throw ValidationError("empty dataset: every row has a missing cell");
  return select_rows(ds, keep);
}

inline DatasetSummary summarize(const Dataset& ds) {
  DatasetSummary s;
  s.n_rows = ds.n_rows;
  if (!ds.labels.empty()) {
    std::size_t pos = 0;
    for (auto l : ds.labels) pos += l;
    s.prevalence = static_cast<double>(pos) / static_cast<double>(ds.labels.size());
  }
  for (const auto& c : ds.columns) {
    const double rate = ds.n_rows ? static_cast<double>(c.missing_count()) /
                                        static_cast<double>(ds.n_rows)
                                  : 0.0;
    s.missing_rate.emplace_back(c.spec.name, rate);
  }
  return s;
}

/// Shuffle-then-chunk fold assignment; the first n % k chunks get one extra row.
inline FoldAssignment split_folds(std::size_t n_rows, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k must be at least 2");
  if (k > n_rows)
    throw ValidationError("k=" + std::to_string(k) + " exceeds row count " +
                          std::to_string(n_rows));
  std::vector<std::size_t> perm(n_rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(seed, "folds");
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of_row.resize(n_rows);
  const std::size_t base = n_rows / k, extra = n_rows % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fa.fold_of_row[perm[pos++]] = f;
  }
  return fa;
}

/// Optional variant: shuffles each class separately and deals rows round-robin
/// so every fold keeps the overall prevalence.
inline FoldAssignment split_folds_stratified(std::span<const std::uint8_t> labels,
                                             std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k must be at least 2");
  if (k > labels.size()) throw ValidationError("k exceeds row count");
  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of_row.resize(labels.size());
  Rng rng = make_rng(seed, "folds-stratified");
  std::size_t next = 0;
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < labels.size(); ++r)
      if (labels[r] == cls) rows.push_back(r);
    std::shuffle(rows.begin(), rows.end(), rng);
    for (auto r : rows) fa.fold_of_row[r] = next++ % k;
  }
  return fa;
}

inline FeatureMatrix to_feature_matrix(const Dataset& ds) {
  FeatureMatrix m;
  m.n_rows = ds.n_rows;
  m.n_features = ds.columns.size();
  m.values.resize(m.n_rows * m.n_features);
  for (std::size_t c = 0; c < ds.columns.size(); ++c) {
    const Column& col = ds.columns[c];
    if (col.missing_count() > 0)
      throw ValidationError("column '" + col.spec.name +
                            "' has missing cells; impute or drop incomplete rows first");
    m.kinds.push_back(col.spec.kind);
    m.n_categories.push_back(col.is_numeric() ? 0 : static_cast<std::int32_t>(col.dictionary.size()));
    m.names.push_back(col.spec.name);
    for (std::size_t r = 0; r < ds.n_rows; ++r) m.values[r * m.n_features + c] = col.value(r);
  }
  return m;
}

/// Per-feature typing and category dictionaries a fitted model depends on.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  std::vector<std::vector<std::string>> dictionaries;

  std::size_t size() const { return names.size(); }
};

inline FeatureSchema schema_of(const Dataset& ds) {
  FeatureSchema s;
  for (const auto& c : ds.columns) {
    s.names.push_back(c.spec.name);
    s.kinds.push_back(c.spec.kind);
    s.dictionaries.push_back(c.dictionary);
  }
  return s;
}

/// Builds model input for `ds` in the column order of `schema`, re-coding
/// categories by their text. Unseen categories get code -1, which matches no
/// one-vs-rest split.
inline FeatureMatrix to_feature_matrix(const Dataset& ds, const FeatureSchema& schema) {
  FeatureMatrix m;
  m.n_rows = ds.n_rows;
  m.n_features = schema.size();
  m.values.resize(m.n_rows * m.n_features);
  m.names = schema.names;
  m.kinds = schema.kinds;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const Column& col = ds.column(schema.names[f]);
    if (col.spec.kind != schema.kinds[f])
      throw ValidationError("column '" + schema.names[f] + "' has a different type than the model expects");
    if (col.missing_count() > 0)
      throw ValidationError("column '" + col.spec.name +
                            "' has missing cells; impute or drop incomplete rows first");
    m.n_categories.push_back(static_cast<std::int32_t>(schema.dictionaries[f].size()));
    std::vector<std::int32_t> remap;
    if (!col.is_numeric()) {
      std::unordered_map<std::string, std::int32_t> idx;
      for (std::size_t i = 0; i < schema.dictionaries[f].size(); ++i)
        idx.emplace(schema.dictionaries[f][i], static_cast<std::int32_t>(i));
      for (const auto& s : col.dictionary) {
        auto it = idx.find(s);
        remap.push_back(it == idx.end() ? -1 : it->second);
      }
    }
    for (std::size_t r = 0; r < ds.n_rows; ++r)
      m.values[r * m.n_features + f] =
          col.is_numeric() ? col.numeric[r] : static_cast<double>(remap[col.codes[r]]);
  }
  return m;
}

}  // namespace icui

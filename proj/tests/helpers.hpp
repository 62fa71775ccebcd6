#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <icui/icui.hpp>

namespace icui::test {

inline Dataset parse(const std::string& text, const std::string& label = "icu_death") {
  std::istringstream in(text);
  return parse_csv(in, std::nullopt, label);
}

/// Row-major numeric matrix.
inline FeatureMatrix matrix(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix m;
  m.n_rows = rows.size();
  m.n_features = rows.empty() ? 0 : rows.front().size();
  for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
  m.kinds.assign(m.n_features, ColumnKind::numeric);
  m.n_categories.assign(m.n_features, 0);
  for (std::size_t f = 0; f < m.n_features; ++f) m.names.push_back("f" + std::to_string(f));
  return m;
}

inline Column numeric(const std::string& name, const std::vector<double>& v,
                      const std::vector<int>& missing_rows = {}) {
  Column c;
  c.spec.name = name;
  c.numeric = v;
  c.missing.assign(v.size(), 0);
  for (int r : missing_rows) {
    c.missing[r] = 1;
    c.numeric[r] = std::nan("");
  }
  return c;
}

inline Column categorical(const std::string& name, const std::vector<std::string>& dict,
                          const std::vector<std::int32_t>& codes) {
  Column c;
  c.spec.name = name;
  c.spec.kind = ColumnKind::categorical;
  c.dictionary = dict;
  c.codes = codes;
  c.missing.assign(codes.size(), 0);
  for (std::size_t r = 0; r < codes.size(); ++r) c.missing[r] = codes[r] < 0;
  return c;
}

inline Dataset dataset(std::vector<Column> cols, std::vector<std::uint8_t> labels = {}) {
  Dataset ds;
  ds.n_rows = cols.empty() ? labels.size() : cols.front().missing.size();
  ds.columns = std::move(cols);
  ds.labels = std::move(labels);
  return ds;
}

// Hand-built tree nodes. Children must be appended after their parent.
inline TreeNode leaf(double value, std::int64_t n, std::int64_t pos = 0) {
  TreeNode t;
  t.value = value;
  t.n_samples = n;
  t.class_counts = {n - pos, pos};
  return t;
}

inline TreeNode split(int feature, double threshold, int left, int right, std::int64_t n,
                      std::int64_t pos = 0, double decrease = 0.0) {
  TreeNode t;
  t.feature = feature;
  t.threshold = threshold;
  t.left = left;
  t.right = right;
  t.n_samples = n;
  t.class_counts = {n - pos, pos};
  t.impurity_decrease = decrease;
  return t;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("icui_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

/// Runs a shell command, capturing stdout and stderr together.
inline CommandResult run_command(const std::string& cmd) {
  CommandResult res;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return res;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) res.output.append(buf, n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

}  // namespace icui::test

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "icui/common.hpp"
#include "icui/data_model.hpp"

namespace icui {

struct SynthSpec {
  std::size_t n_rows = 20000;
  std::size_t n_features = 66;
  std::size_t n_signal = 10;
  double prevalence = 0.2365;
  double missing_rate = 0.0;
  std::uint64_t seed = 7;
  double effect_scale = 1.0;  // multiplies every planted coefficient
  double pair_correlation = 0.5;

  void validate() const {
    if (n_rows < 2) throw ValidationError("synth: need at least 2 rows");
    if (n_features < 1) throw ValidationError("synth: need at least 1 feature");
    if (n_signal > n_features) throw ValidationError("synth: n_signal exceeds n_features");
    if (!(prevalence > 0.0 && prevalence < 1.0))
      throw ValidationError("synth: prevalence must lie in (0, 1)");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0))
      throw ValidationError("synth: missing rate must lie in [0, 1)");
    if (!(pair_correlation >= 0.0 && pair_correlation < 1.0))
      throw ValidationError("synth: pair correlation must lie in [0, 1)");
  }
};

struct SynthMeta {
  std::vector<std::string> signal_features;
  std::vector<double> effect_sizes;  // logistic coefficient per signal, standardized scale
  double realized_prevalence = 0.0;
  std::size_t n_categorical = 0;
};

struct SynthResult {
  Dataset data;  // every column, label last
  SynthMeta meta;
};

/// Names of the synthetic feature columns: numeric columns come in _min/_max
/// pairs (sharing a latent draw), then up to three categorical noise columns.
inline std::vector<std::string> synth_feature_names(const SynthSpec& spec, std::size_t& n_categorical) {
  n_categorical = std::min<std::size_t>(3, spec.n_features - spec.n_signal);
  const std::size_t n_numeric = spec.n_features - n_categorical;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_numeric; ++i) {
    std::string g = std::to_string(i / 2);
    if (g.size() < 2) g.insert(0, 2 - g.size(), '0');
    names.push_back("x" + g + (i % 2 == 0 ? "_min" : "_max"));
  }
  const char* cats[] = {"vent", "dx_class", "dx_sub"};
  for (std::size_t i = 0; i < n_categorical; ++i) names.push_back(cats[i]);
  return names;
}

/// Seeded generator. Each row's risk is u = sum_j beta_j x_j + logistic
/// noise; the round(prevalence * n) rows with the highest u are labelled 1,
/// so the realized rate matches the target to within one row. Non-signal
/// features are independent of the label. Missing cells are dropped
/// completely at random from feature columns only.
inline SynthResult synth_generate(const SynthSpec& spec) {
  spec.validate();
  SynthResult out;
  std::size_t n_cat = 0;
  const auto names = synth_feature_names(spec, n_cat);
  const std::size_t n_numeric = names.size() - n_cat;
  const std::size_t n = spec.n_rows;
  out.meta.n_categorical = n_cat;

  for (std::size_t j = 0; j < spec.n_signal; ++j) {
    const double frac = spec.n_signal > 1 ? static_cast<double>(j) / static_cast<double>(spec.n_signal - 1) : 0.0;
    const double sign = (j / 2) % 2 == 0 ? 1.0 : -1.0;
    out.meta.signal_features.push_back(names[j]);
    out.meta.effect_sizes.push_back(sign * spec.effect_scale * (1.0 - 0.5 * frac));
  }

  Rng rng = make_rng(spec.seed, "synth");
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Per-feature location and scale so columns look like raw measurements.
  std::vector<double> loc(n_numeric), scale(n_numeric);
  for (std::size_t f = 0; f < n_numeric; ++f) {
    loc[f] = std::round(unit(rng) * 200.0);
    scale[f] = 1.0 + std::round(unit(rng) * 40.0);
  }

  std::vector<double> z(n * n_numeric);
  std::vector<double> risk(n);
  const double rho = spec.pair_correlation;
  for (std::size_t r = 0; r < n; ++r) {
    double shared = 0.0;
    for (std::size_t f = 0; f < n_numeric; ++f) {
      if (f % 2 == 0) shared = normal(rng);
      const double v = std::sqrt(rho) * shared + std::sqrt(1.0 - rho) * normal(rng);
      z[r * n_numeric + f] = v;
    }
    double u = 0.0;
    for (std::size_t j = 0; j < spec.n_signal; ++j) u += out.meta.effect_sizes[j] * z[r * n_numeric + j];
    const double p = std::clamp(unit(rng), 1e-12, 1.0 - 1e-12);
    risk[r] = u + std::log(p / (1.0 - p));
  }
  const auto n_pos = static_cast<std::size_t>(std::llround(spec.prevalence * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return risk[a] > risk[b]; });
  std::vector<std::uint8_t> label(n, 0);
  for (std::size_t i = 0; i < n_pos; ++i) label[order[i]] = 1;
  out.meta.realized_prevalence = static_cast<double>(n_pos) / static_cast<double>(n);

  Dataset& ds = out.data;
  ds.n_rows = n;
  auto numeric_column = [&](const std::string& name) {
    Column c;
    c.spec = {name, ColumnKind::numeric, ColumnRole::feature};
    c.numeric.assign(n, 0.0);
    c.missing.assign(n, 0);
    return c;
  };
  auto categorical_column = [&](const std::string& name, std::vector<std::string> dict) {
    Column c;
    c.spec = {name, ColumnKind::categorical, ColumnRole::feature};
    c.codes.assign(n, 0);
    c.missing.assign(n, 0);
    c.dictionary = std::move(dict);
    return c;
  };

  Column stay = numeric_column("patientunitstayid");
  Column encounter = numeric_column("encounter_id");
  Column hospital = numeric_column("hospital_death");
  Column partition = categorical_column("partition", {"train", "valid"});
  std::vector<std::size_t> enc(n);
  std::iota(enc.begin(), enc.end(), 0);
  std::shuffle(enc.begin(), enc.end(), rng);
  for (std::size_t r = 0; r < n; ++r) {
    stay.numeric[r] = static_cast<double>(100000 + r);
    encounter.numeric[r] = static_cast<double>(500000 + enc[r]);
    // Leakage trap: in-hospital death almost always follows ICU death.
    hospital.numeric[r] = label[r] ? 1.0 : (unit(rng) < 0.03 ? 1.0 : 0.0);
    partition.codes[r] = unit(rng) < 0.8 ? 0 : 1;
  }
  ds.columns.push_back(std::move(stay));
  ds.columns.push_back(std::move(encounter));
  ds.columns.push_back(std::move(hospital));
  ds.columns.push_back(std::move(partition));

  for (std::size_t f = 0; f < n_numeric; ++f) {
    Column c = numeric_column(names[f]);
    for (std::size_t r = 0; r < n; ++r)
      c.numeric[r] = std::round((loc[f] + scale[f] * z[r * n_numeric + f]) * 100.0) / 100.0;
    ds.columns.push_back(std::move(c));
  }
  const std::vector<std::vector<std::string>> dicts = {
      {"no", "yes"},
      {"cardiovascular", "respiratory", "neurological", "sepsis", "trauma", "metabolic",
       "gastrointestinal"},
      [] {
        std::vector<std::string> d;
        for (int i = 101; i <= 112; ++i) d.push_back("d" + std::to_string(i));
        return d;
      }()};
  for (std::size_t i = 0; i < n_cat; ++i) {
    Column c = categorical_column(names[n_numeric + i], dicts[i]);
    std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(dicts[i].size()) - 1);
    for (std::size_t r = 0; r < n; ++r) c.codes[r] = pick(rng);
    ds.columns.push_back(std::move(c));
  }

  if (spec.missing_rate > 0.0) {
    Rng mrng = make_rng(spec.seed, "synth-missing");
    for (std::size_t c = 4; c < ds.columns.size(); ++c) {
      Column& col = ds.columns[c];
      for (std::size_t r = 0; r < n; ++r) {
        if (unit(mrng) >= spec.missing_rate) continue;
        col.missing[r] = 1;
        if (col.is_numeric())
          col.numeric[r] = std::nan("");
        else
          col.codes[r] = -1;
      }
    }
  }

  Column y = numeric_column("icu_death");
  y.spec.role = ColumnRole::label;
  for (std::size_t r = 0; r < n; ++r) y.numeric[r] = label[r];
  ds.columns.push_back(std::move(y));
  ds.labels = label;
  ds.label_name = "icu_death";
  return out;
}

inline nlohmann::ordered_json synth_meta_json(const SynthSpec& spec, const SynthMeta& meta) {
  return {{"n_rows", spec.n_rows},
          {"n_features", spec.n_features},
          {"n_signal", spec.n_signal},
          {"prevalence_target", spec.prevalence},
          {"prevalence", meta.realized_prevalence},
          {"missing_rate", spec.missing_rate},
          {"seed", spec.seed},
          {"effect_scale", spec.effect_scale},
          {"pair_correlation", spec.pair_correlation},
          {"signal_features", meta.signal_features},
          {"effect_sizes", meta.effect_sizes}};
}

}  // namespace icui

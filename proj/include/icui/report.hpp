#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "icui/cluster_importance.hpp"
#include "icui/common.hpp"
#include "icui/evaluate.hpp"

namespace icui {

namespace svg {

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                  "#bcbd22", "#17becf"};
  return colors;
}

inline std::string num(double v) { return format_fixed(v, 2); }

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double left = 60, top = 40, width = 400, height = 400;
  double x(double v) const { return left + v * width; }
  double y(double v) const { return top + (1.0 - v) * height; }
};

inline void axes(std::ostream& os, const Frame& f, const std::string& title,
                 const std::string& x_label, const std::string& y_label) {
  os << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-size=\"15\">" << escape(title) << "</text>\n";
  os << "<g stroke=\"#000\" stroke-width=\"1\">\n"
     << "<line x1=\"" << num(f.x(0)) << "\" y1=\"" << num(f.y(0)) << "\" x2=\"" << num(f.x(1))
     << "\" y2=\"" << num(f.y(0)) << "\"/>\n"
     << "<line x1=\"" << num(f.x(0)) << "\" y1=\"" << num(f.y(0)) << "\" x2=\"" << num(f.x(0))
     << "\" y2=\"" << num(f.y(1)) << "\"/>\n</g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double t = i / 5.0;
    os << "<text x=\"" << num(f.x(t)) << "\" y=\"" << num(f.y(0) + 16)
       << "\" text-anchor=\"middle\" font-size=\"11\">" << format_fixed(t, 1) << "</text>\n";
    os << "<text x=\"" << num(f.x(0) - 6) << "\" y=\"" << num(f.y(t) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">" << format_fixed(t, 1) << "</text>\n";
  }
  os << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"" << num(f.y(0) + 36)
     << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(f.top + f.height / 2) << "\" text-anchor=\"middle\" "
     << "font-size=\"13\" transform=\"rotate(-90 16 " << num(f.top + f.height / 2) << ")\">"
     << escape(y_label) << "</text>\n";
}

inline void polyline(std::ostream& os, const Frame& f, const std::vector<CurvePoint>& pts,
                     const std::string& color, std::size_t fold) {
  os << "<polyline class=\"fold\" data-fold=\"" << fold << "\" fill=\"none\" stroke=\"" << color
     << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i)
    os << (i ? " " : "") << num(f.x(pts[i].x)) << ',' << num(f.y(pts[i].y));
  os << "\"/>\n";
}

inline void legend(std::ostream& os, const Frame& f, const std::vector<std::string>& entries,
                   const std::vector<std::string>& colors) {
  const double x0 = f.left + f.width + 16;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double y = f.top + 12 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x0 + 18)
       << "\" y2=\"" << num(y) << "\" stroke=\"" << colors[i] << "\" stroke-width=\"3\"";
    if (colors[i] == "#000") os << " stroke-dasharray=\"4 3\"";
    os << "/>\n<text x=\"" << num(x0 + 24) << "\" y=\"" << num(y + 4) << "\" font-size=\"12\">"
       << escape(entries[i]) << "</text>\n";
  }
}

inline std::string open(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n" +
         "<rect class=\"background\" width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
}

}  // namespace svg

/// ROC panel: one polyline per scored fold plus the chance diagonal.
inline std::string roc_svg(const CvSummary& cv) {
  std::ostringstream os;
  const svg::Frame f;
  os << svg::open(640, 500);
  svg::axes(os, f, "ROC (" + to_string(cv.model) + ")", "False positive rate",
            "True positive rate");
  os << "<line class=\"chance\" x1=\"" << svg::num(f.x(0)) << "\" y1=\"" << svg::num(f.y(0))
     << "\" x2=\"" << svg::num(f.x(1)) << "\" y2=\"" << svg::num(f.y(1))
     << "\" stroke=\"#000\" stroke-dasharray=\"4 3\"/>\n";
  std::vector<std::string> entries, colors;
  for (const auto& m : cv.folds) {
    if (m.flagged) continue;
    const auto& color = svg::palette()[(m.fold - 1) % svg::palette().size()];
    svg::polyline(os, f, m.roc_points, color, m.fold);
    entries.push_back("Fold " + std::to_string(m.fold) + " (AUROC " + format_fixed(m.auroc, 3) + ")");
    colors.push_back(color);
  }
  entries.push_back("Chance");
  colors.push_back("#000");
  svg::legend(os, f, entries, colors);
  os << "</svg>\n";
  return os.str();
}

/// Precision-recall panel: one step curve per fold and a horizontal line at
/// the positive rate.
inline std::string pr_svg(const CvSummary& cv) {
  std::ostringstream os;
  const svg::Frame f;
  os << svg::open(640, 500);
  svg::axes(os, f, "Precision-recall (" + to_string(cv.model) + ")", "Recall", "Precision");
  os << "<line class=\"baseline\" data-baseline=\"" << format_double(cv.baseline) << "\" x1=\""
     << svg::num(f.x(0)) << "\" y1=\"" << svg::num(f.y(cv.baseline)) << "\" x2=\""
     << svg::num(f.x(1)) << "\" y2=\"" << svg::num(f.y(cv.baseline))
     << "\" stroke=\"#000\" stroke-dasharray=\"4 3\"/>\n";
  std::vector<std::string> entries, colors;
  for (const auto& m : cv.folds) {
    if (m.flagged) continue;
    // Step-wise: precision holds until recall reaches the next block.
    std::vector<CurvePoint> steps;
    for (std::size_t i = 0; i < m.pr_points.size(); ++i) {
      if (i > 0) steps.push_back({m.pr_points[i - 1].x, m.pr_points[i].y});
      steps.push_back(m.pr_points[i]);
    }
    const auto& color = svg::palette()[(m.fold - 1) % svg::palette().size()];
    svg::polyline(os, f, steps, color, m.fold);
    entries.push_back("Fold " + std::to_string(m.fold) + " (AP " + format_fixed(m.auprc, 3) + ")");
    colors.push_back(color);
  }
  entries.push_back("Baseline " + format_fixed(cv.baseline, 4));
  colors.push_back("#000");
  svg::legend(os, f, entries, colors);
  os << "</svg>\n";
  return os.str();
}

/// Heatmap: features top to bottom by mean importance, one column per
/// (fold, cluster rank), fill intensity by importance.
inline std::string heatmap_svg(const HeatmapTable& t, const std::string& title) {
  std::ostringstream os;
  const double cell_w = 12, cell_h = 12, left = 150, top = 50;
  const double width = left + cell_w * static_cast<double>(t.n_cols()) + 40;
  const double height = top + cell_h * static_cast<double>(t.n_rows()) + 40;
  double max_v = 0.0;
  for (double v : t.cells) max_v = std::max(max_v, v);
  os << svg::open(width, height);
  os << "<text x=\"" << svg::num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-size=\"15\">" << svg::escape(title) << "</text>\n";
  for (std::size_t r = 0; r < t.n_rows(); ++r)
    os << "<text x=\"" << svg::num(left - 4) << "\" y=\""
       << svg::num(top + cell_h * static_cast<double>(r) + cell_h - 2)
       << "\" text-anchor=\"end\" font-size=\"10\">" << svg::escape(t.row_names[r]) << "</text>\n";
  std::size_t prev_fold = 0;
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    const auto [fold, rank] = t.columns[c];
    if (fold != prev_fold) {
      os << "<text x=\"" << svg::num(left + cell_w * static_cast<double>(c)) << "\" y=\""
         << svg::num(top - 6) << "\" font-size=\"10\">Fold " << fold << "</text>\n";
      prev_fold = fold;
    }
  }
  for (std::size_t r = 0; r < t.n_rows(); ++r)
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      const double v = t.at(r, c);
      const double s = max_v > 0.0 ? v / max_v : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - s)));
      char color[8];
      std::snprintf(color, sizeof(color), "#ff%02x%02x", shade, shade);
      os << "<rect class=\"cell\" x=\"" << svg::num(left + cell_w * static_cast<double>(c))
         << "\" y=\"" << svg::num(top + cell_h * static_cast<double>(r)) << "\" width=\""
         << svg::num(cell_w) << "\" height=\"" << svg::num(cell_h) << "\" fill=\"" << color
         << "\" data-value=\"" << format_double(v) << "\"/>\n";
    }
  os << "</svg>\n";
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

}  // namespace icui

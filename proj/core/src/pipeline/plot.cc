#include "w2a/pipeline/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace w2a::pipeline {
namespace {

constexpr double kWidth = 640.0;
constexpr double kPanelHeight = 200.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 30.0;
constexpr double kMarginBottom = 30.0;

std::string Fixed(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Short(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void Add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void Settle() {
    if (lo > hi) {
      lo = 0.0;
      hi = 1.0;
    } else if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

}  // namespace

std::string RenderSvg(const MetricTable& table) {
  const std::size_t metrics = table.columns.size() - 1;
  const double height = kPanelHeight * static_cast<double>(metrics);
  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kPanelHeight - kMarginTop - kMarginBottom;

  Range xr;
  for (const auto& row : table.rows) xr.Add(*row[0]);
  xr.Settle();

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + Fixed(kWidth) + "\" height=\"" +
                    Fixed(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t m = 0; m < metrics; ++m) {
    const std::size_t col = m + 1;
    Range yr;
    for (const auto& row : table.rows) {
      if (row[col]) yr.Add(*row[col]);
    }
    yr.Settle();
    const double top = kPanelHeight * static_cast<double>(m) + kMarginTop;
    const double bottom = top + plot_h;
    svg += "<g>\n";
    svg += "<text x=\"" + Fixed(kMarginLeft) + "\" y=\"" + Fixed(top - 10.0) + "\">" + table.columns[col] +
           "</text>\n";
    svg += "<rect x=\"" + Fixed(kMarginLeft) + "\" y=\"" + Fixed(top) + "\" width=\"" + Fixed(plot_w) +
           "\" height=\"" + Fixed(plot_h) + "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg += "<text x=\"" + Fixed(kMarginLeft - 5.0) + "\" y=\"" + Fixed(top + 4.0) +
           "\" text-anchor=\"end\">" + Short(yr.hi) + "</text>\n";
    svg += "<text x=\"" + Fixed(kMarginLeft - 5.0) + "\" y=\"" + Fixed(bottom) + "\" text-anchor=\"end\">" +
           Short(yr.lo) + "</text>\n";
    svg += "<text x=\"" + Fixed(kMarginLeft) + "\" y=\"" + Fixed(bottom + 15.0) + "\">" + Short(xr.lo) +
           "</text>\n";
    svg += "<text x=\"" + Fixed(kMarginLeft + plot_w) + "\" y=\"" + Fixed(bottom + 15.0) +
           "\" text-anchor=\"end\">" + table.columns[0] + " " + Short(xr.hi) + "</text>\n";
    std::string points;
    for (const auto& row : table.rows) {
      if (!row[col] || !std::isfinite(*row[col]) || !std::isfinite(*row[0])) continue;
      const double x = kMarginLeft + (*row[0] - xr.lo) / (xr.hi - xr.lo) * plot_w;
      const double y = bottom - (*row[col] - yr.lo) / (yr.hi - yr.lo) * plot_h;
      if (!points.empty()) points += ' ';
      points += Fixed(x) + ',' + Fixed(y);
    }
    svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace w2a::pipeline

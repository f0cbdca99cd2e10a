#pragma once

// Minimal static SVG line charts: axes, legend and defection tick marks.

#include <string>
#include <vector>

namespace defectsim {

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> markers;  // x positions of defection events
};

struct LineChart {
  std::string title;
  std::string x_label = "round";
  std::string y_label = "F";
  bool log_y = false;  // non-positive values are dropped when set
  std::vector<ChartSeries> series;
  int width = 720;
  int height = 420;
};

std::string render_svg(const LineChart& chart);

}  // namespace defectsim

#pragma once

// Minimal SVG charts for run reports.

#include <filesystem>
#include <string>
#include <vector>

namespace ungan {

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

struct PlotAxes {
  std::string title, x_label, y_label;
};

// Polylines with point markers.
std::string svg_line_plot(const PlotAxes& axes, const std::vector<PlotSeries>& series);
// Point markers only.
std::string svg_scatter_plot(const PlotAxes& axes, const std::vector<PlotSeries>& series);

}  // namespace ungan

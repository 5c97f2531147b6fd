#pragma once

#include <string>
#include <vector>

namespace exitnet {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Static SVG line chart: one polyline per series, linear axes fitted to the
// data, legend in the top-right corner.
std::string svg_line_plot(const std::vector<PlotSeries>& series, const std::string& x_label,
                          const std::string& y_label, const std::string& title = {});

}  // namespace exitnet

#pragma once

#include <string>
#include <vector>

namespace oppo {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal static SVG line chart.
std::string render_line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                                 const std::vector<PlotSeries>& series);

/// Reads every per-seed metrics CSV in a run directory and writes
/// reward.svg (moving-average reward per seed) next to them. Returns the
/// paths of the images written.
std::vector<std::string> plot_run_directory(const std::string& dir);

}  // namespace oppo

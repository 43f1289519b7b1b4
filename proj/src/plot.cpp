#include "oppo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace oppo {

namespace {

constexpr int kWidth = 760;
constexpr int kHeight = 460;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string render_line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                                 const std::vector<PlotSeries>& series) {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_min = x_max = s.x[i];
        y_min = y_max = s.y[i];
        first = false;
      }
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;
  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return kMarginTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  // axes
  svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft << "\" y2=\""
      << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\"" << kMarginLeft + plot_w
      << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double fx = x_min + (x_max - x_min) * tick / 4.0;
    const double fy = y_min + (y_max - y_min) * tick / 4.0;
    svg << "<text x=\"" << px(fx) << "\" y=\"" << kMarginTop + plot_h + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(fx) << "</text>\n";
    svg << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(fy) << "</text>\n";
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << py(fy) << "\" x2=\"" << kMarginLeft + plot_w << "\" y2=\""
        << py(fy) << "\" stroke=\"#dddddd\"/>\n";
  }
  svg << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kMarginTop + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << kMarginTop + plot_h / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << kMarginLeft + plot_w - 6 << "\" y=\"" << kMarginTop + 16 + 14 * k
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << s.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace {

PlotSeries series_from_csv(const std::string& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("plot: cannot open " + path);
  PlotSeries series;
  series.label = label;
  std::string line;
  if (!std::getline(in, line)) return series;  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string cell;
    std::getline(is, cell, ',');
    const double x = std::stod(cell);
    std::getline(is, cell, ',');
    const double y = std::stod(cell);
    series.x.push_back(x);
    series.y.push_back(y);
  }
  return series;
}

}  // namespace

std::vector<std::string> plot_run_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("plot: not a directory: " + dir);
  std::vector<std::string> seed_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed_", 0) == 0 && entry.path().extension() == ".csv") {
      seed_files.push_back(entry.path().string());
    }
  }
  std::sort(seed_files.begin(), seed_files.end());
  if (seed_files.empty()) throw std::runtime_error("plot: no seed_*.csv files in " + dir);
  std::vector<PlotSeries> series;
  for (const auto& path : seed_files) {
    series.push_back(series_from_csv(path, fs::path(path).stem().string()));
  }
  const fs::path summary = fs::path(dir) / "summary.csv";
  if (fs::exists(summary)) {
    PlotSeries mean = series_from_csv(summary.string(), "mean");
    series.push_back(std::move(mean));
  }
  const std::string out_path = (fs::path(dir) / "reward.svg").string();
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("plot: cannot write " + out_path);
  out << render_line_plot_svg("episode reward (moving average)", "environment steps", "reward", series);
  return {out_path};
}

}  // namespace oppo

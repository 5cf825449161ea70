#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace cpinn::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;  // non-positive values are dropped
  std::vector<Series> series;
};

/// Fixed 640 x 400 viewport, axes with five ticks each, legend top right.
/// Output depends only on the input (no timestamps, fixed number format).
/// Throws std::invalid_argument if no series has a plottable point.
std::string render(const LinePlot& plot);

struct Heatmap {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x0 = 0.0, x1 = 1.0;  // horizontal extent (columns)
  double y0 = 0.0, y1 = 1.0;  // vertical extent (rows, y0 at the bottom)
  Eigen::MatrixXd values;     // rows along y, columns along x
  double vmin = 0.0;          // color scale; vmin == vmax maps to the middle color
  double vmax = 1.0;
};

/// Colormap: linear interpolation through five anchors
/// #440154, #3b528b, #21918c, #5ec962, #fde725 (viridis stops 0, .25, .5,
/// .75, 1). Values outside [vmin, vmax] clamp.
std::array<int, 3> colormap(double s);

/// One rect per cell (callers downsample large grids), a color bar, and
/// data-vmin / data-vmax attributes on the root element.
std::string render(const Heatmap& map);

/// Shared color scale for several fields.
std::pair<double, double> value_range(const std::vector<const Eigen::MatrixXd*>& fields);

/// Nearest-node subsample to at most max_rows x max_cols.
Eigen::MatrixXd downsample(const Eigen::MatrixXd& m, int max_rows, int max_cols);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cpinn::svg

#include "cpinn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace cpinn::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\" font-family=\"sans-serif\" font-size=\"12\"";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12) {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" +
         std::to_string(size) + "\">" + escape(s) + "</text>\n";
}

std::string hex(const std::array<int, 3>& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

}  // namespace

std::string render(const LinePlot& plot) {
  auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("svg: series '" + s.name + "' x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (plot.log_y && s.y[i] <= 0.0)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  }
  if (!(xmin <= xmax)) throw std::invalid_argument("svg: nothing to plot");
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax == ymin) {
    ymin -= plot.log_y ? 0.5 : (ymin == 0.0 ? 1.0 : 0.1 * std::abs(ymin));
    ymax += plot.log_y ? 0.5 : (ymax == 0.0 ? 1.0 : 0.1 * std::abs(ymax));
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::string o = header(kWidth, kHeight) + ">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
  o += text(kWidth / 2, 22, plot.title, "middle", 14);
  o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    o += "<line x1=\"" + num(px(xv)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(px(xv)) + "\" y2=\"" +
         num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    o += text(px(xv), kTop + ph + 18, label(xv));
    o += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(py(yv)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(py(yv)) + "\" stroke=\"black\"/>\n";
    o += text(kLeft - 8, py(yv) + 4, plot.log_y ? "1e" + label(yv) : label(yv), "end");
  }
  o += text(kLeft + pw / 2, kHeight - 10, plot.x_label);
  o += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(kTop + ph / 2) + ")\">" + escape(plot.y_label) + "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (plot.log_y && s.y[i] <= 0.0)) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(s.x[i])) + "," + num(py(ty(s.y[i])));
    }
    o += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"" +
         (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + " points=\"" + pts + "\"/>\n";
    const double ly = kTop + 16 + 16.0 * static_cast<double>(k);
    const double lx = kLeft + pw - 150;
    o += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 24) + "\" y2=\"" + num(ly - 4) +
         "\" stroke=\"" + color + "\" stroke-width=\"1.5\"" + (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + "/>\n";
    o += text(lx + 30, ly, s.name, "start");
  }
  o += "</svg>\n";
  return o;
}

std::array<int, 3> colormap(double s) {
  static constexpr int anchors[5][3] = {{0x44, 0x01, 0x54}, {0x3b, 0x52, 0x8b}, {0x21, 0x91, 0x8c},
                                        {0x5e, 0xc9, 0x62}, {0xfd, 0xe7, 0x25}};
  if (!std::isfinite(s)) s = 0.0;
  s = std::clamp(s, 0.0, 1.0) * 4.0;
  const int i = std::min(static_cast<int>(s), 3);
  const double w = s - i;
  std::array<int, 3> c{};
  for (int k = 0; k < 3; ++k) {
    c[static_cast<std::size_t>(k)] =
        static_cast<int>(std::lround((1.0 - w) * anchors[i][k] + w * anchors[i + 1][k]));
  }
  return c;
}

std::string render(const Heatmap& map) {
  const Eigen::Index rows = map.values.rows();
  const Eigen::Index cols = map.values.cols();
  if (rows == 0 || cols == 0) throw std::invalid_argument("svg: empty heatmap");
  const double bar = 50.0;
  const double pw = kWidth - kLeft - kRight - bar;
  const double ph = kHeight - kTop - kBottom;
  const double cw = pw / static_cast<double>(cols);
  const double ch = ph / static_cast<double>(rows);
  const double span = map.vmax - map.vmin;
  auto scale = [&](double v) { return span > 0.0 ? (v - map.vmin) / span : 0.5; };

  std::string o = header(kWidth, kHeight) + " data-vmin=\"" + label(map.vmin) + "\" data-vmax=\"" +
                  label(map.vmax) + "\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
  o += text(kLeft + pw / 2, 22, map.title, "middle", 14);
  o += "<g shape-rendering=\"crispEdges\">\n";
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double y = kTop + ph - static_cast<double>(i + 1) * ch;
    for (Eigen::Index j = 0; j < cols; ++j) {
      o += "<rect x=\"" + num(kLeft + static_cast<double>(j) * cw) + "\" y=\"" + num(y) + "\" width=\"" +
           num(cw + 0.05) + "\" height=\"" + num(ch + 0.05) + "\" fill=\"" + hex(colormap(scale(map.values(i, j)))) +
           "\"/>\n";
    }
  }
  o += "</g>\n";
  o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double f = k / 4.0;
    o += text(kLeft + f * pw, kTop + ph + 18, label(map.x0 + f * (map.x1 - map.x0)));
    o += text(kLeft - 8, kTop + ph - f * ph + 4, label(map.y0 + f * (map.y1 - map.y0)), "end");
  }
  o += text(kLeft + pw / 2, kHeight - 10, map.x_label);
  o += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(kTop + ph / 2) + ")\">" + escape(map.y_label) + "</text>\n";

  const double bx = kLeft + pw + 12;
  const int steps = 32;
  for (int k = 0; k < steps; ++k) {
    const double f = (k + 0.5) / steps;
    o += "<rect x=\"" + num(bx) + "\" y=\"" + num(kTop + ph - (k + 1) * ph / steps) + "\" width=\"12\" height=\"" +
         num(ph / steps + 0.05) + "\" fill=\"" + hex(colormap(f)) + "\"/>\n";
  }
  o += text(bx + 6, kTop - 6, label(map.vmax));
  o += text(bx + 6, kTop + ph + 18, label(map.vmin));
  o += "</svg>\n";
  return o;
}

std::pair<double, double> value_range(const std::vector<const Eigen::MatrixXd*>& fields) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* f : fields) {
    if (f->size() == 0) continue;
    lo = std::min(lo, f->minCoeff());
    hi = std::max(hi, f->maxCoeff());
  }
  if (!(lo <= hi)) throw std::invalid_argument("svg: no values for a color range");
  return {lo, hi};
}

Eigen::MatrixXd downsample(const Eigen::MatrixXd& m, int max_rows, int max_cols) {
  const Eigen::Index r = std::min<Eigen::Index>(m.rows(), max_rows);
  const Eigen::Index c = std::min<Eigen::Index>(m.cols(), max_cols);
  auto pick = [](Eigen::Index k, Eigen::Index n, Eigen::Index total) {
    return n > 1 ? (k * (total - 1) + (n - 1) / 2) / (n - 1) : 0;
  };
  Eigen::MatrixXd out(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) out(i, j) = m(pick(i, r, m.rows()), pick(j, c, m.cols()));
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace cpinn::svg

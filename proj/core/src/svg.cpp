#include "fairvec/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace fairvec::svg {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
}

struct Axis {
  double lo, hi;
  bool log;
  double map(double v, double a, double b) const {
    const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo))
                         : (v - lo) / (hi - lo);
    return a + t * (b - a);
  }
};

Axis fit(std::vector<double> values, bool log) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    if (log && !(v > 0.0)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) {
    lo = log ? 1e-4 : 0.0;
    hi = 1.0;
  }
  if (hi <= lo) hi = log ? lo * 10.0 : lo + 1.0;
  return {lo, hi, log};
}

std::string axes(const Axis& x, const Axis& y, const std::string& xl, const std::string& yl) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string out = "<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(x1 - x0) +
                    "\" height=\"" + num(y0 - y1) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    const double xv = x.log ? std::pow(10.0, std::log10(x.lo) + t * (std::log10(x.hi) - std::log10(x.lo)))
                            : x.lo + t * (x.hi - x.lo);
    const double yv = y.log ? std::pow(10.0, std::log10(y.lo) + t * (std::log10(y.hi) - std::log10(y.lo)))
                            : y.lo + t * (y.hi - y.lo);
    const double px = x0 + t * (x1 - x0);
    const double py = y0 + t * (y1 - y0);
    out += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" +
           label_num(xv) + "</text>\n";
    out += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" +
           label_num(yv) + "</text>\n";
  }
  out += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 20) +
         "\" text-anchor=\"middle\">" + escape(xl) + "</text>\n";
  out += "<text x=\"18\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num((y0 + y1) / 2) + ")\">" + escape(yl) + "</text>\n";
  return out;
}

std::string legend(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 14.0 * static_cast<double>(i);
    const double x = kWidth - kRight + 12;
    out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"10\" height=\"10\" fill=\"" +
           kPalette[i % 8] + "\"/>\n";
    out += "<text x=\"" + num(x + 14) + "\" y=\"" + num(y + 9) + "\">" + escape(names[i]) + "</text>\n";
  }
  return out;
}

}  // namespace

std::string render(const LineChart& chart) {
  std::vector<double> xs, ys;
  for (const auto& s : chart.series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  const auto x = fit(xs, chart.log_x);
  const auto y = fit(ys, chart.log_y);
  std::string out = header(chart.title) + axes(x, y, chart.x_label, chart.y_label);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    names.push_back(s.name);
    std::string points;
    for (std::size_t n = 0; n < s.x.size() && n < s.y.size(); ++n) {
      const double xv = chart.log_x ? std::max(s.x[n], x.lo) : s.x[n];
      const double yv = chart.log_y ? std::max(s.y[n], y.lo) : s.y[n];
      points += num(x.map(xv, kLeft, kWidth - kRight)) + "," +
                num(y.map(yv, kHeight - kBottom, kTop)) + " ";
    }
    out += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(kPalette[i % 8]) +
           "\" points=\"" + points + "\"/>\n";
  }
  out += legend(names) + "</svg>\n";
  return out;
}

std::string render(const BarChart& chart) {
  std::vector<double> ys{0.0};
  for (const auto& g : chart.groups) ys.insert(ys.end(), g.y.begin(), g.y.end());
  const auto y = fit(ys, false);
  const Axis x{0.0, 1.0, false};
  std::string out = header(chart.title) + axes(x, y, "", chart.y_label);
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double slot = (x1 - x0) / static_cast<double>(std::max<std::size_t>(1, chart.categories.size()));
  const double bar = slot * 0.8 / static_cast<double>(std::max<std::size_t>(1, chart.groups.size()));
  const double zero = y.map(0.0, kHeight - kBottom, kTop);
  std::vector<std::string> names;
  for (std::size_t g = 0; g < chart.groups.size(); ++g) {
    names.push_back(chart.groups[g].name);
    for (std::size_t c = 0; c < chart.categories.size() && c < chart.groups[g].y.size(); ++c) {
      const double top = y.map(chart.groups[g].y[c], kHeight - kBottom, kTop);
      const double left = x0 + slot * static_cast<double>(c) + slot * 0.1 + bar * static_cast<double>(g);
      out += "<rect x=\"" + num(left) + "\" y=\"" + num(std::min(top, zero)) + "\" width=\"" +
             num(bar) + "\" height=\"" + num(std::abs(zero - top)) + "\" fill=\"" + kPalette[g % 8] +
             "\"/>\n";
    }
  }
  for (std::size_t c = 0; c < chart.categories.size(); ++c) {
    out += "<text x=\"" + num(x0 + slot * (static_cast<double>(c) + 0.5)) + "\" y=\"" +
           num(kHeight - kBottom + 30) + "\" text-anchor=\"middle\">" + escape(chart.categories[c]) +
           "</text>\n";
  }
  out += "<line x1=\"" + num(x0) + "\" x2=\"" + num(x1) + "\" y1=\"" + num(zero) + "\" y2=\"" +
         num(zero) + "\" stroke=\"black\"/>\n";
  out += legend(names) + "</svg>\n";
  return out;
}

std::string heatmap(const std::string& title, const std::vector<std::string>& labels,
                    const std::vector<std::vector<double>>& values) {
  std::string out = header(title);
  const double size = std::min(kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  const double cell = size / static_cast<double>(std::max<std::size_t>(1, labels.size()));
  for (std::size_t r = 0; r < values.size(); ++r) {
    for (std::size_t c = 0; c < values[r].size(); ++c) {
      const double v = std::clamp(values[r][c], 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      const double x = kLeft + cell * static_cast<double>(c);
      const double y = kTop + cell * static_cast<double>(r);
      out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" +
             num(cell) + "\" fill=\"rgb(" + std::to_string(shade) + "," + std::to_string(shade) + "," +
             std::to_string(shade) + ")\"/>\n";
      out += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(y + cell / 2 + 4) +
             "\" text-anchor=\"middle\" fill=\"" + (v > 0.5 ? "white" : "black") + "\">" +
             label_num(values[r][c]) + "</text>\n";
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double mid = cell * (static_cast<double>(i) + 0.5);
    out += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(kTop + mid + 4) + "\" text-anchor=\"end\">" +
           escape(labels[i]) + "</text>\n";
    out += "<text x=\"" + num(kLeft + mid) + "\" y=\"" + num(kTop + size + 16) +
           "\" text-anchor=\"middle\">" + escape(labels[i]) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace fairvec::svg

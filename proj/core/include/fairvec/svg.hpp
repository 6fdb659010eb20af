#pragma once

#include <string>
#include <vector>

namespace fairvec::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

// Step lines; log axes clamp non-positive values to the smallest positive one.
std::string render(const LineChart& chart);

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> categories;
  std::vector<Series> groups;  // y holds one value per category; x is unused
};

std::string render(const BarChart& chart);

// Grey-scale heatmap of values in [0, 1] with row/column labels.
std::string heatmap(const std::string& title, const std::vector<std::string>& labels,
                    const std::vector<std::vector<double>>& values);

}  // namespace fairvec::svg

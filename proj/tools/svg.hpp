#pragma once

#include <string>
#include <utility>
#include <vector>

namespace lckd::svg {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y) in data units
  bool markers_only = false;                      // star markers, no connecting line
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  /// When non-empty, x values are tick indices and these are their labels.
  std::vector<std::string> x_ticks;
  bool log_y = false;
};

/// Line chart with a legend. Throws UsageError when no series has points.
std::string line_chart(const Axes& axes, const std::vector<Series>& series);

/// Vertical bars for values in [0, 1], shown as percentages.
std::string bar_chart(const Axes& axes, const std::vector<std::string>& labels,
                      const std::vector<double>& values);

}  // namespace lckd::svg

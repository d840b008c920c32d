#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fmt/format.h>
#include <limits>
#include <sstream>

#include "lckd/errors.hpp"

namespace lckd::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

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

std::string num(double v) { return fmt::format("{:.2f}", v); }

std::string tick_label(double v) {
  if (v != 0 && (std::abs(v) >= 1e4 || std::abs(v) < 1e-2)) return fmt::format("{:.1e}", v);
  return fmt::format("{:.3g}", v);
}

struct Frame {
  double x0, x1, y0, y1;
  bool log_y;
  [[nodiscard]] double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  [[nodiscard]] double py(double y) const {
    const double v = log_y ? std::log10(y) : y;
    return kHeight - kBottom - (v - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

void open(std::ostringstream& os, const Axes& axes) {
  os << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)",
                    kWidth, kHeight, kWidth, kHeight)
     << '\n'
     << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n'
     << fmt::format(R"(<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>)",
                    num((kWidth - kRight + kLeft) / 2), escape(axes.title))
     << '\n'
     << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>)",
                    num((kWidth - kRight + kLeft) / 2), num(kHeight - 15), escape(axes.x_label))
     << '\n'
     << fmt::format(
            R"svg(<text x="18" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>)svg",
            num(kHeight / 2), num(kHeight / 2), escape(axes.y_label))
     << '\n';
}

void frame_lines(std::ostringstream& os, const Frame& f) {
  os << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)", num(kLeft),
                    num(kTop), num(kWidth - kLeft - kRight), num(kHeight - kTop - kBottom))
     << '\n';
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    const double y = kHeight - kBottom - (kHeight - kTop - kBottom) * i / 4.0;
    os << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#ddd"/>)", num(kLeft), num(y),
                      num(kWidth - kRight), num(y))
       << '\n'
       << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>)",
                      num(kLeft - 6), num(y + 4), tick_label(f.log_y ? std::pow(10.0, v) : v))
       << '\n';
  }
}

void x_tick(std::ostringstream& os, double x, const std::string& label) {
  os << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", num(x), num(kHeight - kBottom),
                    num(x), num(kHeight - kBottom + 5))
     << '\n'
     << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>)",
                    num(x), num(kHeight - kBottom + 18), escape(label))
     << '\n';
}

std::string star(double cx, double cy, double r, const char* colour) {
  std::string pts;
  for (int i = 0; i < 10; ++i) {
    const double a = -std::numbers::pi / 2 + i * std::numbers::pi / 5;
    const double rr = i % 2 == 0 ? r : r * 0.45;
    pts += fmt::format("{},{} ", num(cx + rr * std::cos(a)), num(cy + rr * std::sin(a)));
  }
  return fmt::format(R"(<polygon points="{}" fill="{}" stroke="black" stroke-width="0.5"/>)", pts, colour);
}

}  // namespace

std::string line_chart(const Axes& axes, const std::vector<Series>& series) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) throw DataError("plot: non-finite value in series " + s.label);
      if (axes.log_y && y <= 0) throw DataError("plot: log axis needs positive values");
      const double v = axes.log_y ? std::log10(y) : y;
      xmin = std::min(xmin, x), xmax = std::max(xmax, x), ymin = std::min(ymin, v), ymax = std::max(ymax, v);
    }
  if (!std::isfinite(xmin)) throw DataError("plot: nothing to draw");
  if (!axes.x_ticks.empty()) xmin = -0.5, xmax = static_cast<double>(axes.x_ticks.size()) - 0.5;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  const Frame f{xmin, xmax, ymin - pad, ymax + pad, axes.log_y};

  std::ostringstream os;
  open(os, axes);
  frame_lines(os, f);
  if (!axes.x_ticks.empty()) {
    for (std::size_t i = 0; i < axes.x_ticks.size(); ++i) x_tick(os, f.px(static_cast<double>(i)), axes.x_ticks[i]);
  } else {
    for (int i = 0; i <= 4; ++i) {
      const double v = xmin + (xmax - xmin) * i / 4.0;
      x_tick(os, f.px(v), tick_label(v));
    }
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % std::size(kPalette)];
    const auto& pts = series[s].points;
    if (!series[s].markers_only && pts.size() > 1) {
      std::string path;
      for (auto [x, y] : pts) path += fmt::format("{},{} ", num(f.px(x)), num(f.py(y)));
      os << fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>)", path, colour)
         << '\n';
    }
    for (auto [x, y] : pts) {
      if (series[s].markers_only)
        os << star(f.px(x), f.py(y), 7, colour) << '\n';
      else if (pts.size() < 50)
        os << fmt::format(R"(<circle cx="{}" cy="{}" r="3" fill="{}"/>)", num(f.px(x)), num(f.py(y)), colour) << '\n';
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
    os << fmt::format(R"(<rect x="{}" y="{}" width="12" height="12" fill="{}"/>)", num(kWidth - kRight + 12),
                      num(ly - 10), colour)
       << '\n'
       << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>)",
                      num(kWidth - kRight + 30), num(ly), escape(series[s].label))
       << '\n';
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const Axes& axes, const std::vector<std::string>& labels, const std::vector<double>& values) {
  if (labels.empty() || labels.size() != values.size()) throw DataError("plot: bar chart needs one value per label");
  const Frame f{-0.5, static_cast<double>(labels.size()) - 0.5, 0.0, 1.0, false};
  std::ostringstream os;
  open(os, axes);
  frame_lines(os, f);
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    const double x = f.px(static_cast<double>(i));
    os << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>)", num(x - slot * 0.3), num(f.py(v)),
                      num(slot * 0.6), num(f.py(0) - f.py(v)), kPalette[0])
       << '\n'
       << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}%</text>)",
                      num(x), num(f.py(v) - 4), fmt::format("{:.0f}", 100 * v))
       << '\n';
    x_tick(os, x, labels[i]);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lckd::svg

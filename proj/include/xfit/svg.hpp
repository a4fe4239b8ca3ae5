#pragma once

// Minimal self-contained SVG line charts: one polyline per series over a
// (usually log-scaled) x axis, circle markers, a legend, and the numbers
// embedded as a comment so every figure stays auditable as plain text.

#include <xfit/io.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace xfit {

struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
};

struct SvgOptions {
  std::string title, x_label, y_label;
  bool log_x = true;
  std::optional<double> y_min, y_max;  // fix the y range (e.g. coverage [0,1])
  std::optional<double> ref_y;         // dashed horizontal reference line
};

namespace detail {

inline const char* svg_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  return palette[i % 6];
}

}  // namespace detail

inline std::string line_chart_svg(const std::vector<SvgSeries>& series,
                                  const SvgOptions& opt) {
  if (series.empty()) throw std::invalid_argument("line_chart_svg: no series");
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size())
      throw std::invalid_argument("line_chart_svg: bad series " + s.label);
    for (double v : s.x)
      if (opt.log_x && v <= 0)
        throw std::invalid_argument("line_chart_svg: log axis needs x > 0");
  }

  const double W = 640, H = 420, L = 74, R = 24, T = 40, B = 52;
  auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };

  std::vector<double> xs;
  double y_lo = opt.y_min.value_or(1e300), y_hi = opt.y_max.value_or(-1e300);
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xs.push_back(s.x[i]);
      if (!opt.y_min) y_lo = std::min(y_lo, s.y[i]);
      if (!opt.y_max) y_hi = std::max(y_hi, s.y[i]);
    }
  if (opt.ref_y) {
    if (!opt.y_min) y_lo = std::min(y_lo, *opt.ref_y);
    if (!opt.y_max) y_hi = std::max(y_hi, *opt.ref_y);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  double x_lo = tx(xs.front()), x_hi = tx(xs.back());
  if (x_hi - x_lo < 1e-12) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi - y_lo < 1e-12) {
    const double pad = std::max(1e-12, std::abs(y_hi) * 0.1 + 0.05);
    y_lo -= pad;
    y_hi += pad;
  } else if (!opt.y_min && !opt.y_max) {
    const double pad = (y_hi - y_lo) * 0.08;
    y_lo -= pad;
    y_hi += pad;
  }

  auto px = [&](double v) {
    return L + (tx(v) - x_lo) / (x_hi - x_lo) * (W - L - R);
  };
  auto py = [&](double v) {
    return H - B - (v - y_lo) / (y_hi - y_lo) * (H - T - B);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\" font-family=\"sans-serif\" font-size=\"12\">\n";

  svg += "<!-- data\nseries,x,y\n";
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg += csv_escape(s.label) + "," + fmt_g(s.x[i]) + "," + fmt_g(s.y[i]) + "\n";
  svg += "-->\n";

  svg += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt_g(W / 2) + "\" y=\"22\" text-anchor=\"middle\" "
         "font-size=\"15\">" + opt.title + "</text>\n";

  // y ticks and gridlines
  for (int t = 0; t <= 4; ++t) {
    const double v = y_lo + (y_hi - y_lo) * t / 4.0;
    const double yy = py(v);
    svg += "<line x1=\"" + fmt_g(L) + "\" y1=\"" + fmt_g(yy) + "\" x2=\"" +
           fmt_g(W - R) + "\" y2=\"" + fmt_g(yy) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    char lab[32];
    std::snprintf(lab, sizeof lab, "%.4g", v);
    svg += "<text x=\"" + fmt_g(L - 8) + "\" y=\"" + fmt_g(yy + 4) +
           "\" text-anchor=\"end\">" + lab + "</text>\n";
  }
  // x ticks at the observed sizes
  for (double v : xs) {
    const double xx = px(v);
    svg += "<line x1=\"" + fmt_g(xx) + "\" y1=\"" + fmt_g(H - B) + "\" x2=\"" +
           fmt_g(xx) + "\" y2=\"" + fmt_g(H - B + 5) +
           "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + fmt_g(xx) + "\" y=\"" + fmt_g(H - B + 19) +
           "\" text-anchor=\"middle\">" + fmt_g(v) + "</text>\n";
  }
  // axes
  svg += "<line x1=\"" + fmt_g(L) + "\" y1=\"" + fmt_g(T) + "\" x2=\"" + fmt_g(L) +
         "\" y2=\"" + fmt_g(H - B) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<line x1=\"" + fmt_g(L) + "\" y1=\"" + fmt_g(H - B) + "\" x2=\"" +
         fmt_g(W - R) + "\" y2=\"" + fmt_g(H - B) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<text x=\"" + fmt_g((L + W - R) / 2) + "\" y=\"" + fmt_g(H - 10) +
         "\" text-anchor=\"middle\">" + opt.x_label +
         (opt.log_x ? " (log scale)" : "") + "</text>\n";
  svg += "<text x=\"18\" y=\"" + fmt_g((T + H - B) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fmt_g((T + H - B) / 2) + ")\">" + opt.y_label + "</text>\n";

  if (opt.ref_y) {
    const double yy = py(*opt.ref_y);
    svg += "<line x1=\"" + fmt_g(L) + "\" y1=\"" + fmt_g(yy) + "\" x2=\"" +
           fmt_g(W - R) + "\" y2=\"" + fmt_g(yy) +
           "\" stroke=\"#888888\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n";
    svg += "<text x=\"" + fmt_g(W - R - 4) + "\" y=\"" + fmt_g(yy - 5) +
           "\" text-anchor=\"end\" fill=\"#888888\">" + fmt_g(*opt.ref_y) +
           "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = detail::svg_color(si);
    if (s.x.size() >= 2) {
      svg += "<polyline fill=\"none\" stroke=\"";
      svg += color;
      svg += "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (i) svg += " ";
        svg += fmt_g(px(s.x[i])) + "," + fmt_g(py(s.y[i]));
      }
      svg += "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg += "<circle cx=\"" + fmt_g(px(s.x[i])) + "\" cy=\"" +
             fmt_g(py(s.y[i])) + "\" r=\"3.5\" fill=\"" + color + "\"/>\n";

    const double ly = T + 8 + 16 * static_cast<double>(si);
    svg += "<line x1=\"" + fmt_g(W - R - 150) + "\" y1=\"" + fmt_g(ly) +
           "\" x2=\"" + fmt_g(W - R - 126) + "\" y2=\"" + fmt_g(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt_g(W - R - 120) + "\" y=\"" + fmt_g(ly + 4) + "\">" +
           s.label + "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace xfit

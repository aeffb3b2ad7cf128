// LassoFlow - prescribed-time elastic-net Lasso solver via Newton KKT flows
// Copyright 2026 LassoFlow Contributors
// Licensed under Apache 2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lassoflow {

struct SvgSeries {
  std::string label;
  std::vector<double> t;
  std::vector<double> value;
  std::string color;       // empty -> palette color by index
  double stroke_width = 1.5;
};

struct SvgChartOptions {
  std::string title;
  std::string x_label = "t";
  std::string y_label = "log10 value";
  int width = 860;
  int height = 540;
  double value_floor = 1e-16;        // values below this clamp to the floor
  std::vector<double> markers;       // vertical dashed lines (e.g. at each T_p)
  bool legend = true;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt_num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
                                 "#bcbd22", "#7f7f7f"};
  return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

}  // namespace detail

/// Write a standalone SVG line chart with a linear x axis and log10 y axis.
/// Throws std::invalid_argument (before creating the file) when there is no
/// data to plot.
inline void render_svg_chart(const std::vector<SvgSeries>& series,
                             const SvgChartOptions& opt,
                             const std::filesystem::path& path) {
  bool any = false;
  for (const auto& s : series) {
    if (s.t.size() != s.value.size())
      throw std::invalid_argument("render_svg_chart: series '" + s.label +
                                  "' has mismatched t/value lengths");
    if (!s.t.empty()) any = true;
  }
  if (series.empty() || !any)
    throw std::invalid_argument("render_svg_chart: no data to plot");

  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  double lmin = std::numeric_limits<double>::infinity(), lmax = -lmin;
  auto logv = [&](double v) { return std::log10(std::max(v, opt.value_floor)); };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      tmin = std::min(tmin, s.t[i]);
      tmax = std::max(tmax, s.t[i]);
      lmin = std::min(lmin, logv(s.value[i]));
      lmax = std::max(lmax, logv(s.value[i]));
    }
  for (double m : opt.markers) {
    tmin = std::min(tmin, m);
    tmax = std::max(tmax, m);
  }
  if (tmax <= tmin) tmax = tmin + 1.0;
  if (lmax <= lmin) lmax = lmin + 1.0;
  lmin = std::floor(lmin);
  lmax = std::ceil(lmax);

  const double ml = 70, mr = 20, mt = opt.title.empty() ? 20 : 44, mb = 52;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  auto px = [&](double t) { return ml + pw * (t - tmin) / (tmax - tmin); };
  auto py = [&](double v) { return mt + ph * (lmax - logv(v)) / (lmax - lmin); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
      << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width << " "
      << opt.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    svg << "<text x=\"" << opt.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">"
        << detail::svg_escape(opt.title) << "</text>\n";

  // axes box
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";

  // y ticks at integer decades (thinned to at most ~12 labels)
  const int decades = static_cast<int>(lmax - lmin);
  const int ystride = std::max(1, (decades + 11) / 12);
  for (int e = static_cast<int>(lmin); e <= static_cast<int>(lmax); e += ystride) {
    const double yy = mt + ph * (lmax - e) / (lmax - lmin);
    svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << yy << "\" x2=\"" << ml
        << "\" y2=\"" << yy << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << yy << "\" x2=\"" << ml + pw
        << "\" y2=\"" << yy << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << yy + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e"
        << e << "</text>\n";
  }
  // x ticks
  const int nx = 6;
  for (int i = 0; i <= nx; ++i) {
    const double tv = tmin + (tmax - tmin) * i / nx;
    const double xx = px(tv);
    svg << "<line x1=\"" << xx << "\" y1=\"" << mt + ph << "\" x2=\"" << xx
        << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << xx << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::fmt_num(tv) << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << detail::svg_escape(opt.x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">"
      << detail::svg_escape(opt.y_label) << "</text>\n";

  for (double m : opt.markers)
    svg << "<line x1=\"" << px(m) << "\" y1=\"" << mt << "\" x2=\"" << px(m)
        << "\" y2=\"" << mt + ph
        << "\" stroke=\"#888888\" stroke-dasharray=\"5,4\"/>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.t.empty()) continue;
    const std::string color = s.color.empty() ? detail::palette(si) : s.color;
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
        << s.stroke_width << "\" points=\"";
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (i) svg << ' ';
      svg << detail::fmt_num(px(s.t[i])) << ',' << detail::fmt_num(py(s.value[i]));
    }
    svg << "\"/>\n";
  }

  if (opt.legend) {
    double ly = mt + 10;
    for (std::size_t si = 0; si < series.size(); ++si) {
      const auto& s = series[si];
      if (s.label.empty()) continue;
      const std::string color = s.color.empty() ? detail::palette(si) : s.color;
      svg << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly << "\" x2=\""
          << ml + pw - 126 << "\" y2=\"" << ly << "\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly + 4
          << "\" font-family=\"sans-serif\" font-size=\"11\">"
          << detail::svg_escape(s.label) << "</text>\n";
      ly += 16;
    }
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write SVG file: " + path.string());
  out << svg.str();
  if (!out) throw std::runtime_error("failed writing SVG file: " + path.string());
}

}  // namespace lassoflow

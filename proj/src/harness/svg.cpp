#include "cappa/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace cappa::harness {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
constexpr int kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Axis {
  bool log;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0); }
  double t(double v) const { return log ? std::log10(v) : v; }
  void include(double v) {
    if (!usable(v)) return;
    lo = std::min(lo, t(v));
    hi = std::max(hi, t(v));
  }
  void finish() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (log) {
      lo = std::floor(lo);
      hi = std::ceil(hi);
    }
    if (hi - lo < 1e-12) {
      const double pad = log ? 1.0 : std::max(1.0, std::abs(lo)) * 0.5;
      lo -= pad;
      hi += pad;
    }
  }
  // Tick positions in transformed coordinates.
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const int step = std::max(1, static_cast<int>(std::ceil((hi - lo) / 10.0)));
      for (double d = lo; d <= hi + 1e-9; d += step) out.push_back(d);
      return out;
    }
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(v);
    return out;
  }
  std::string label(double tv) const {
    if (log) return fmt::format("1e{}", static_cast<int>(std::lround(tv)));
    return fmt::format("{:.4g}", std::abs(tv) < 1e-12 ? 0.0 : tv);
  }
};

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series) {
  Axis ax{spec.log_x}, ay{spec.log_y};
  for (const auto& s : series) {
    for (double v : s.x) ax.include(v);
    for (double v : s.y) ay.include(v);
    for (double v : s.y_low) ay.include(v);
    for (double v : s.y_high) ay.include(v);
    if (s.style == SeriesStyle::stem && !spec.log_y) ay.include(0.0);
  }
  ax.finish();
  ay.finish();

  const double pw = spec.width - kLeft - kRight, ph = spec.height - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (ax.t(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ay.t(v) - ay.lo) / (ay.hi - ay.lo) * ph; };
  auto py_t = [&](double tv) { return kTop + ph - (tv - ay.lo) / (ay.hi - ay.lo) * ph; };
  auto px_t = [&](double tv) { return kLeft + (tv - ax.lo) / (ax.hi - ax.lo) * pw; };

  std::string out;
  out += fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)"
                     "\n",
                     spec.width, spec.height, spec.width, spec.height);
  if (spec.timestamp) out += "<!-- generated " + escape_xml(*spec.timestamp) + " -->\n";
  out += fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)"
                     "\n",
                     spec.width, spec.height);
  out += fmt::format(R"(<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>)"
                     "\n",
                     kLeft + pw / 2, escape_xml(spec.title));

  // Axes, grid and ticks.
  out += fmt::format(R"(<rect x="{}" y="{}" width="{:.2f}" height="{:.2f}" fill="none" stroke="black"/>)"
                     "\n",
                     kLeft, kTop, pw, ph);
  for (double tv : ax.ticks()) {
    const double x = px_t(tv);
    out += fmt::format(R"(<line x1="{0:.2f}" y1="{1}" x2="{0:.2f}" y2="{2:.2f}" stroke="#dddddd"/>)"
                       "\n",
                       x, kTop, kTop + ph);
    out += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>)"
                       "\n",
                       x, kTop + ph + 16, ax.label(tv));
  }
  for (double tv : ay.ticks()) {
    const double y = py_t(tv);
    out += fmt::format(R"(<line x1="{0}" y1="{1:.2f}" x2="{2:.2f}" y2="{1:.2f}" stroke="#dddddd"/>)"
                       "\n",
                       kLeft, y, kLeft + pw);
    out += fmt::format(R"(<text x="{}" y="{:.2f}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>)"
                       "\n",
                       kLeft - 6, y + 4, ay.label(tv));
  }
  out += fmt::format(R"(<text x="{:.2f}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>)"
                     "\n",
                     kLeft + pw / 2, spec.height - 18, escape_xml(spec.x_label));
  out += fmt::format(
      R"svg(<text x="18" y="{0:.2f}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {0:.2f})">{1}</text>)svg"
      "\n",
      kTop + ph / 2, escape_xml(spec.y_label));

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    auto ok = [&](std::size_t i) { return ax.usable(s.x[i]) && ay.usable(s.y[i]); };

    if (s.style == SeriesStyle::line) {
      std::string pts;
      auto flush = [&] {
        if (!pts.empty())
          out += fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>)"
                             "\n",
                             color, pts);
        pts.clear();
      };
      for (std::size_t i = 0; i < n; ++i) {
        if (!ok(i)) {
          flush();
          continue;
        }
        pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", px(s.x[i]), py(s.y[i]));
      }
      flush();
    } else {
      const double base = spec.log_y ? kTop + ph : std::clamp(py_t(0.0), static_cast<double>(kTop), kTop + ph);
      for (std::size_t i = 0; i < n; ++i) {
        if (!ok(i)) continue;
        if (s.style == SeriesStyle::stem)
          out += fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="{3}"/>)"
                             "\n",
                             px(s.x[i]), base, py(s.y[i]), color);
        out += fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="2.5" fill="{}"/>)"
                           "\n",
                           px(s.x[i]), py(s.y[i]), color);
      }
    }
    for (std::size_t i = 0; i < std::min({n, s.y_low.size(), s.y_high.size()}); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y_low[i]) || !ay.usable(s.y_high[i])) continue;
      out += fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="{3}" stroke-width="1"/>)"
                         "\n",
                         px(s.x[i]), py(s.y_low[i]), py(s.y_high[i]), color);
    }
    // Legend entry.
    const double ly = kTop + 14 + 18.0 * static_cast<double>(si);
    out += fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{2:.2f}" y2="{1:.2f}" stroke="{3}" stroke-width="3"/>)"
                       "\n",
                       kLeft + pw + 12, ly, kLeft + pw + 32, color);
    out += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-family="sans-serif" font-size="11">{}</text>)"
                       "\n",
                       kLeft + pw + 38, ly + 4, escape_xml(s.label));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace cappa::harness

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cappa::harness {

enum class SeriesStyle { line, stem, points };

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  SeriesStyle style = SeriesStyle::line;
  /// Optional vertical range per point (drawn as a bar), e.g. min/max over trials.
  std::vector<double> y_low;
  std::vector<double> y_high;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 720;
  int height = 480;
  /// Written as a comment; leave empty for byte-reproducible output.
  std::optional<std::string> timestamp;
};

/// Minimal standalone SVG chart. Points that cannot be shown on a log axis
/// (<= 0) or are not finite are skipped and break the line.
std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace cappa::harness

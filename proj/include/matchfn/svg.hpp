#pragma once

#include <optional>
#include <string>
#include <vector>

namespace matchfn::svg {

struct Series {
  std::string label;
  std::vector<double> values;  // NaN leaves a gap
  std::string color = "#1f77b4";
};

struct Marker {
  std::size_t index = 0;  // position on the x axis
  double value = 0.0;
  std::string label;
};

struct LineChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> x_labels;  // one per observation, e.g. "2014-01"
  std::vector<Series> series;
  /// Horizontal reference line that is always inside the y range.
  std::optional<double> reference;
  std::optional<Marker> marker;
  double width = 720.0;
  double height = 360.0;
};

/// Standalone SVG document. The plotted numbers are repeated as CSV inside an
/// XML comment at the top so the file can be diffed and parsed back in tests.
std::string render(const LineChart& chart);

/// Escapes &, <, >, " and ' for text nodes and attribute values.
std::string escape(const std::string& text);

}  // namespace matchfn::svg

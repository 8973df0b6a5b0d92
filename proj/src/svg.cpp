#include "matchfn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "matchfn/error.hpp"
#include "matchfn/io.hpp"

namespace matchfn::svg {

namespace {

constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;  // legend column
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string fixed(double v, int digits = 2) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

// Round tick step: 1, 2 or 5 times a power of ten, about `target` ticks.
double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

// Comment bodies may not contain "--".
std::string comment_safe(std::string s) {
  for (std::size_t i = s.find("--"); i != std::string::npos; i = s.find("--", i)) s.replace(i, 2, "- ");
  return s;
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render(const LineChart& chart) {
  const std::size_t n = chart.x_labels.size();
  for (const auto& s : chart.series) {
    if (s.values.size() != n) {
      throw InputError("svg series '" + s.label + "' has " + std::to_string(s.values.size()) +
                       " values for " + std::to_string(n) + " x positions");
    }
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : chart.series) {
    for (double v : s.values) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (chart.reference) {
    lo = std::min(lo, *chart.reference);
    hi = std::max(hi, *chart.reference);
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double step = tick_step(hi - lo, 5);
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;

  const double plot_w = chart.width - kLeft - kRight;
  const double plot_h = chart.height - kTop - kBottom;
  const auto px = [&](std::size_t i) {
    return kLeft + (n > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(n - 1) : plot_w / 2);
  };
  const auto py = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(chart.width, 0) << "\" height=\""
      << fixed(chart.height, 0) << "\" viewBox=\"0 0 " << fixed(chart.width, 0) << ' '
      << fixed(chart.height, 0) << "\">\n";

  out << "<!-- data\nx";
  for (const auto& s : chart.series) out << ',' << comment_safe(s.label);
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << comment_safe(chart.x_labels[i]);
    for (const auto& s : chart.series) out << ',' << io::format_number(s.values[i]);
    out << '\n';
  }
  out << "-->\n";

  out << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fixed(kLeft) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
      << escape(chart.title) << "</text>\n";

  // Axes and grid.
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (double y = lo; y <= hi + step * 1e-9; y += step) {
    out << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(py(y)) << "\" x2=\"" << fixed(kLeft + plot_w)
        << "\" y2=\"" << fixed(py(y)) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(py(y) + 4)
        << "\" text-anchor=\"end\">" << io::format_number(std::round(y / step) * step) << "</text>\n";
  }
  const std::size_t every = std::max<std::size_t>(1, (n + 7) / 8);
  for (std::size_t i = 0; i < n; i += every) {
    out << "<text x=\"" << fixed(px(i)) << "\" y=\"" << fixed(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << escape(chart.x_labels[i]) << "</text>\n";
  }
  out << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + plot_h) << "\" x2=\"" << fixed(kLeft + plot_w)
      << "\" y2=\"" << fixed(kTop + plot_h) << "\" stroke=\"#333\"/>\n";
  out << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft)
      << "\" y2=\"" << fixed(kTop + plot_h) << "\" stroke=\"#333\"/>\n";
  out << "<text transform=\"translate(16," << fixed(kTop + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(chart.y_label) << "</text>\n";
  out << "</g>\n";

  if (chart.reference) {
    const double y = py(*chart.reference);
    out << "<line class=\"reference\" x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(y) << "\" x2=\""
        << fixed(kLeft + plot_w) << "\" y2=\"" << fixed(y)
        << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    out << "<text x=\"" << fixed(kLeft + plot_w + 4) << "\" y=\"" << fixed(y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#666\">"
        << io::format_number(*chart.reference) << "</text>\n";
  }

  // One polyline per run of finite values.
  for (const auto& s : chart.series) {
    std::string points;
    const auto flush = [&] {
      if (!points.empty()) {
        out << "<polyline fill=\"none\" stroke=\"" << escape(s.color) << "\" stroke-width=\"1.6\" points=\""
            << points << "\"/>\n";
      }
      points.clear();
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.values[i])) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += fixed(px(i)) + ',' + fixed(py(s.values[i]));
    }
    flush();
  }

  if (chart.marker && chart.marker->index < n) {
    const auto& m = *chart.marker;
    out << "<circle class=\"marker\" cx=\"" << fixed(px(m.index)) << "\" cy=\"" << fixed(py(m.value))
        << "\" r=\"4\" fill=\"#d62728\"/>\n";
    out << "<text x=\"" << fixed(px(m.index) + 6) << "\" y=\"" << fixed(py(m.value) - 6)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">" << escape(m.label) << "</text>\n";
  }

  // Legend.
  double ly = kTop + 10;
  for (const auto& s : chart.series) {
    const double lx = kLeft + plot_w + 30;
    out << "<line x1=\"" << fixed(lx) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(lx + 18) << "\" y2=\""
        << fixed(ly) << "\" stroke=\"" << escape(s.color) << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fixed(lx + 24) << "\" y=\"" << fixed(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label) << "</text>\n";
    ly += 18;
  }

  out << "</svg>\n";
  return out.str();
}

}  // namespace matchfn::svg

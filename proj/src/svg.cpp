#include "lockstack/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lockstack/io.hpp"

namespace lockstack::svg {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 360.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 16.0;
constexpr double kTop = 32.0;
constexpr double kBottom = 56.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string escape(std::string_view s) {
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

std::string num(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

class Frame {
 public:
  Frame(double x0, Range xr, Range yr) : x0_{x0}, xr_{xr}, yr_{yr} {}

  [[nodiscard]] double px(double x) const {
    return x0_ + kLeft + (x - xr_.lo) / (xr_.hi - xr_.lo) * (kWidth - kLeft - kRight);
  }
  [[nodiscard]] double py(double y) const {
    return kTop + (yr_.hi - y) / (yr_.hi - yr_.lo) * (kHeight - kTop - kBottom);
  }

  void axes(std::ostream& out, std::string_view title, std::string_view xlabel,
            std::string_view ylabel, bool x_ticks) const {
    const double left = x0_ + kLeft;
    const double right = x0_ + kWidth - kRight;
    const double bottom = kHeight - kBottom;
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(kTop) << "\" width=\"" << num(right - left)
        << "\" height=\"" << num(bottom - kTop) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << num((left + right) / 2) << "\" y=\"20\" text-anchor=\"middle\">"
        << escape(title) << "</text>\n";
    out << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(kHeight - 10)
        << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
    out << "<text transform=\"translate(" << num(x0_ + 14) << ',' << num((kTop + bottom) / 2)
        << ") rotate(-90)\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
    for (int t = 0; t <= 4; ++t) {
      const double y = yr_.lo + (yr_.hi - yr_.lo) * t / 4.0;
      out << "<text x=\"" << num(left - 4) << "\" y=\"" << num(py(y) + 4)
          << "\" text-anchor=\"end\" font-size=\"10\">" << escape(format_tick(y)) << "</text>\n";
      if (x_ticks) {
        const double x = xr_.lo + (xr_.hi - xr_.lo) * t / 4.0;
        out << "<text x=\"" << num(px(x)) << "\" y=\"" << num(bottom + 14)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(format_tick(x))
            << "</text>\n";
      }
    }
  }

 private:
  static std::string format_tick(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
  }

  double x0_;
  Range xr_;
  Range yr_;
};

void draw(std::ostream& out, double x0, const LinePanel& panel) {
  Range xr;
  Range yr;
  for (const Series& s : panel.series) {
    for (std::size_t j = 0; j < s.x.size() && j < s.y.size(); ++j) {
      if (std::isfinite(s.y[j])) {
        xr.add(s.x[j]);
        yr.add(s.y[j]);
      }
    }
  }
  xr.finish();
  yr.finish();
  const Frame frame(x0, xr, yr);
  frame.axes(out, panel.title, panel.xlabel, panel.ylabel, true);
  for (std::size_t k = 0; k < panel.series.size(); ++k) {
    const Series& s = panel.series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (std::size_t j = 0; j < s.x.size() && j < s.y.size(); ++j) {
      if (std::isfinite(s.y[j])) {
        out << num(frame.px(s.x[j])) << ',' << num(frame.py(s.y[j])) << ' ';
      }
    }
    out << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k + 1);
    out << "<text x=\"" << num(x0 + kWidth - kRight - 6) << "\" y=\"" << num(ly)
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << colour << "\">" << escape(s.label)
        << "</text>\n";
  }
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double at = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(at));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (at - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void draw(std::ostream& out, double x0, const BoxPanel& panel) {
  Range xr;
  xr.lo = -0.5;
  xr.hi = static_cast<double>(panel.groups.size()) - 0.5;
  Range yr;
  for (const auto& g : panel.groups) {
    for (double v : g) {
      yr.add(v);
    }
  }
  yr.finish();
  const Frame frame(x0, xr, yr);
  frame.axes(out, panel.title, "", panel.ylabel, false);
  for (std::size_t k = 0; k < panel.groups.size(); ++k) {
    std::vector<double> g;
    for (double v : panel.groups[k]) {
      if (std::isfinite(v)) {
        g.push_back(v);
      }
    }
    const double cx = frame.px(static_cast<double>(k));
    if (k < panel.labels.size()) {
      out << "<text x=\"" << num(cx) << "\" y=\"" << num(kHeight - kBottom + 14)
          << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(panel.labels[k]) << "</text>\n";
    }
    if (g.empty()) {
      continue;
    }
    const double q1 = quantile(g, 0.25);
    const double q2 = quantile(g, 0.5);
    const double q3 = quantile(g, 0.75);
    const double lo = *std::min_element(g.begin(), g.end());
    const double hi = *std::max_element(g.begin(), g.end());
    const double half = 0.3 * (frame.px(1.0) - frame.px(0.0));
    const char* colour = kPalette[k % std::size(kPalette)];
    out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(frame.py(lo)) << "\" x2=\"" << num(cx)
        << "\" y2=\"" << num(frame.py(hi)) << "\" stroke=\"#444\"/>\n";
    out << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(frame.py(q3)) << "\" width=\""
        << num(2 * half) << "\" height=\"" << num(frame.py(q1) - frame.py(q3)) << "\" fill=\""
        << colour << "\" fill-opacity=\"0.4\" stroke=\"" << colour << "\"/>\n";
    out << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(frame.py(q2)) << "\" x2=\""
        << num(cx + half) << "\" y2=\"" << num(frame.py(q2)) << "\" stroke=\"#000\" stroke-width=\"2\"/>\n";
  }
}

}  // namespace

std::string render(std::span<const Panel> panels, std::string_view manifest_hash) {
  std::ostringstream out;
  const double width = kWidth * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<!-- manifest: " << manifest_hash << " -->\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double x0 = kWidth * static_cast<double>(p);
    std::visit([&](const auto& panel) { draw(out, x0, panel); }, panels[p]);
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace lockstack::svg

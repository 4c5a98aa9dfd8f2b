#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lockstack::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct LinePanel {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
};

struct BoxPanel {
  std::string title;
  std::string ylabel;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> groups;
};

using Panel = std::variant<LinePanel, BoxPanel>;

/// Panels side by side in one standalone SVG document. The manifest hash is
/// embedded as a comment; nothing time-dependent is written.
std::string render(std::span<const Panel> panels, std::string_view manifest_hash);

}  // namespace lockstack::svg

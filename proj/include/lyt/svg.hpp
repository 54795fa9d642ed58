// Minimal standalone SVG chart emitter for pipeline reports: line charts
// (loss curves, latent-trajectory overlays) and bar charts (ranked probe
// scores). Output is deterministic: fixed canvas, stable number formatting,
// and series rendered in input order, so identical data produces identical
// path strings.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lyt/common.hpp"

namespace lyt {

struct SvgSeries {
    std::string label;
    std::vector<std::pair<real, real>> points;  // non-finite points are skipped
};

// Polyline chart with axes, tick labels, and a legend. Throws ContractError
// when no series contains a finite point.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<SvgSeries>& series);

// Vertical bars, one per (label, value), y axis from min(0, values) upward.
std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                          const std::vector<std::pair<std::string, real>>& bars);

}  // namespace lyt

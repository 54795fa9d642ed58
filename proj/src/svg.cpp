#include "lyt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace lyt {

namespace {

constexpr int kWidth = 640, kHeight = 420;
constexpr int kLeft = 64, kRight = 24, kTop = 40, kBottom = 48;
constexpr int kPlotW = kWidth - kLeft - kRight;
constexpr int kPlotH = kHeight - kTop - kBottom;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr std::size_t kPaletteN = sizeof(kPalette) / sizeof(kPalette[0]);

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
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

std::string num(real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick(real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Range {
    real lo = std::numeric_limits<real>::infinity();
    real hi = -std::numeric_limits<real>::infinity();
    void add(real v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (!(hi > lo)) {  // single value (or empty): open a visible window
            const real c = std::isfinite(lo) ? lo : 0.0;
            lo = c - 1.0;
            hi = c + 1.0;
        } else {
            const real m = 0.05 * (hi - lo);
            lo -= m;
            hi += m;
        }
    }
    real frac(real v) const { return (v - lo) / (hi - lo); }
};

void open_svg(std::ostringstream& os, const std::string& title) {
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" fill=\"white\"/>\n"
       << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"15\" fill=\"#222\">"
       << esc(title) << "</text>\n";
}

void axes(std::ostringstream& os, const Range& rx, const Range& ry,
          const std::string& x_label, const std::string& y_label) {
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW
       << "\" height=\"" << kPlotH << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const real fx = real(i) / 4.0;
        const real px = kLeft + fx * kPlotW;
        const real py = kTop + kPlotH - fx * kPlotH;
        os << "<line x1=\"" << num(px) << "\" y1=\"" << kTop + kPlotH << "\" x2=\"" << num(px)
           << "\" y2=\"" << kTop + kPlotH + 5 << "\" stroke=\"#444\"/>\n"
           << "<text x=\"" << num(px) << "\" y=\"" << kTop + kPlotH + 19
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
              "fill=\"#333\">"
           << esc(tick(rx.lo + fx * (rx.hi - rx.lo))) << "</text>\n"
           << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << kLeft
           << "\" y2=\"" << num(py) << "\" stroke=\"#444\"/>\n"
           << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
              "fill=\"#333\">"
           << esc(tick(ry.lo + fx * (ry.hi - ry.lo))) << "</text>\n";
    }
    os << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kHeight - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
          "fill=\"#222\">"
       << esc(x_label) << "</text>\n"
       << "<text x=\"16\" y=\"" << kTop + kPlotH / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
          "fill=\"#222\" transform=\"rotate(-90 16 "
       << kTop + kPlotH / 2 << ")\">" << esc(y_label) << "</text>\n";
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<SvgSeries>& series) {
    Range rx, ry;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points)
            if (std::isfinite(x) && std::isfinite(y)) {
                rx.add(x);
                ry.add(y);
            }
    if (!std::isfinite(rx.lo)) throw ContractError("svg: no finite data points");
    rx.pad();
    ry.pad();

    std::ostringstream os;
    open_svg(os, title);
    axes(os, rx, ry, x_label, y_label);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % kPaletteN];
        std::string d;
        bool pen_down = false;
        for (const auto& [x, y] : series[i].points) {
            if (!std::isfinite(x) || !std::isfinite(y)) {
                pen_down = false;  // break the line at gaps
                continue;
            }
            const real px = kLeft + rx.frac(x) * kPlotW;
            const real py = kTop + kPlotH - ry.frac(y) * kPlotH;
            d += (pen_down ? "L" : "M") + num(px) + " " + num(py) + " ";
            pen_down = true;
        }
        if (!d.empty())
            os << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << color
               << "\" stroke-width=\"1.5\"/>\n";
        os << "<rect x=\"" << kLeft + kPlotW - 150 << "\" y=\"" << kTop + 8 + 16 * int(i)
           << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n"
           << "<text x=\"" << kLeft + kPlotW - 133 << "\" y=\"" << kTop + 14 + 16 * int(i)
           << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">"
           << esc(series[i].label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                          const std::vector<std::pair<std::string, real>>& bars) {
    if (bars.empty()) throw ContractError("svg: no bars");
    Range ry;
    ry.add(0.0);
    for (const auto& [label, v] : bars) {
        if (!std::isfinite(v)) throw ContractError("svg: non-finite bar value");
        ry.add(v);
    }
    ry.pad();

    std::ostringstream os;
    open_svg(os, title);
    Range rx;
    rx.lo = 0;
    rx.hi = real(bars.size());
    axes(os, rx, ry, "", y_label);
    const real band = real(kPlotW) / real(bars.size());
    const real y0 = kTop + kPlotH - ry.frac(0.0) * kPlotH;
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const real v = bars[i].second;
        const real py = kTop + kPlotH - ry.frac(v) * kPlotH;
        const real x = kLeft + band * real(i) + band * 0.15;
        const real top = std::min(py, y0), h = std::fabs(py - y0);
        os << "<rect x=\"" << num(x) << "\" y=\"" << num(top) << "\" width=\""
           << num(band * 0.7) << "\" height=\"" << num(h) << "\" fill=\""
           << kPalette[i % kPaletteN] << "\"/>\n"
           << "<text x=\"" << num(kLeft + band * (real(i) + 0.5)) << "\" y=\""
           << kTop + kPlotH + 19
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\" "
              "fill=\"#333\">"
           << esc(bars[i].first) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace lyt

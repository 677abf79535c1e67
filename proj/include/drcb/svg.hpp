#pragma once

#include <algorithm>
#include <cstdio>
#include <string>

#include "drcb/metrics.hpp"

namespace drcb {

namespace detail_svg {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline std::string rect(double x, double y, double w, double h, const std::string& fill,
                        const std::string& extra = "") {
    return "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) + "\" height=\"" +
           fmt(h) + "\" fill=\"" + fill + "\"" + (extra.empty() ? "" : " " + extra) + "/>\n";
}

inline std::string text(double x, double y, const std::string& s, int size = 11,
                        const std::string& anchor = "middle", const std::string& fill = "#111") {
    return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" + std::to_string(size) +
           "\" font-family=\"monospace\" text-anchor=\"" + anchor + "\" fill=\"" + fill + "\">" + s +
           "</text>\n";
}

// White to deep blue.
inline std::string heat_color(double v) {
    int r = static_cast<int>(255 - 205 * v);
    int g = static_cast<int>(255 - 175 * v);
    int b = static_cast<int>(255 - 80 * v);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace detail_svg

// Row-normalized heatmap with raw counts printed in the cells.
inline std::string confusion_heatmap_svg(const ConfusionMatrix& m, const std::string& title = "") {
    using namespace detail_svg;
    const double cell = 34, margin = 60, top = title.empty() ? 40.0 : 60.0;
    double wpx = margin + m.K * cell + 20, hpx = top + m.K * cell + 40;
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(wpx) +
                    "\" height=\"" + fmt(hpx) + "\" viewBox=\"0 0 " + fmt(wpx) + " " + fmt(hpx) +
                    "\">\n";
    s += rect(0, 0, wpx, hpx, "#ffffff");
    if (!title.empty()) s += text(wpx / 2, 24, title, 14);
    for (int i = 0; i < m.K; ++i) {
        std::int64_t rs = m.row_sum(i);
        for (int j = 0; j < m.K; ++j) {
            double norm = rs > 0 ? static_cast<double>(m.at(i, j)) / rs : 0.0;
            double x = margin + j * cell, y = top + i * cell;
            s += rect(x, y, cell, cell, heat_color(norm), "stroke=\"#ccc\" stroke-width=\"0.5\"");
            s += text(x + cell / 2, y + cell / 2 + 4, std::to_string(m.at(i, j)), 10, "middle",
                      norm > 0.55 ? "#ffffff" : "#111111");
        }
        s += text(margin - 8, top + i * cell + cell / 2 + 4, std::to_string(i), 11, "end");
        s += text(margin + i * cell + cell / 2, top + m.K * cell + 16, std::to_string(i), 11);
    }
    s += text(margin - 40, top + m.K * cell / 2.0, "actual", 11, "middle");
    s += text(margin + m.K * cell / 2.0, top + m.K * cell + 32, "predicted", 11);
    s += "</svg>\n";
    return s;
}

// Bars in [0, max(1, max value)]; undefined cells get a hatched gray marker.
inline std::string rca_bar_svg(const std::vector<MetricCell>& class_rca,
                               const std::string& title = "per-class relative recall") {
    using namespace detail_svg;
    int K = static_cast<int>(class_rca.size());
    const double bar = 34, gap = 10, margin = 50, top = 50, plot_h = 180;
    double wpx = margin + K * (bar + gap) + 20, hpx = top + plot_h + 50;
    double vmax = 1.0;
    for (const auto& c : class_rca)
        if (c.defined) vmax = std::max(vmax, c.value);
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(wpx) +
                    "\" height=\"" + fmt(hpx) + "\" viewBox=\"0 0 " + fmt(wpx) + " " + fmt(hpx) +
                    "\">\n";
    s += rect(0, 0, wpx, hpx, "#ffffff");
    s += text(wpx / 2, 24, title, 14);
    // y axis with 0, 0.5, 1 guides
    for (double tick : {0.0, 0.5, 1.0}) {
        double y = top + plot_h - plot_h * tick / vmax;
        s += rect(margin, y, K * (bar + gap), 0.8, "#dddddd");
        s += text(margin - 6, y + 4, fmt(tick), 10, "end");
    }
    for (int c = 0; c < K; ++c) {
        double x = margin + c * (bar + gap) + gap / 2;
        const MetricCell& cell = class_rca[static_cast<std::size_t>(c)];
        if (cell.defined) {
            double h = plot_h * cell.value / vmax;
            s += rect(x, top + plot_h - h, bar, h, "#3566a5");
            s += text(x + bar / 2, top + plot_h - h - 5, fmt(cell.value), 10);
        } else {
            s += rect(x, top + plot_h - 14, bar, 14, "#bbbbbb", "stroke=\"#888\" stroke-dasharray=\"3,2\"");
            s += text(x + bar / 2, top + plot_h - 18, "undef", 10, "middle", "#666");
        }
        s += text(x + bar / 2, top + plot_h + 16, std::to_string(c), 11);
    }
    s += "</svg>\n";
    return s;
}

}  // namespace drcb

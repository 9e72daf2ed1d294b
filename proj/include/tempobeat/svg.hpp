#pragma once

/** @file
 * Minimal SVG charts. Coordinates are printed with two decimals so output
 * is byte-stable; every data point carries a `data-x`/`data-y` attribute
 * with the exact value so tests can compare charts structurally.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "tempobeat/io.hpp"

namespace tempobeat::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    /// NaN entries are skipped (absent cells)
    std::vector<double> y;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    double width = 640;
    double height = 360;
    /// force zero into the y range
    bool include_zero = true;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Frame {
    double left = 60, right = 20, top = 36, bottom = 48;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    double w = 640, h = 360;

    [[nodiscard]] double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
    [[nodiscard]] double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

inline Frame frame_for(const std::vector<Series>& series, const ChartOptions& opt) {
    Frame f;
    f.w = opt.width;
    f.h = opt.height;
    bool any = false;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            if (!any) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                any = true;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (opt.include_zero) {
        ymin = std::min(ymin, 0.0);
        ymax = std::max(ymax, 0.0);
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pad = 0.05 * (ymax - ymin);
    f.x0 = xmin;
    f.x1 = xmax;
    f.y0 = opt.include_zero && ymin == 0.0 ? 0.0 : ymin - pad;
    f.y1 = ymax + pad;
    return f;
}

inline std::string open(const Frame& f, const ChartOptions& opt) {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.w) + "\" height=\"" + num(f.h) +
                      "\" viewBox=\"0 0 " + num(f.w) + " " + num(f.h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text class=\"title\" x=\"" + num(f.w / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
           escape(opt.title) + "</text>\n";
    out += "<text class=\"xlabel\" x=\"" + num(f.w / 2) + "\" y=\"" + num(f.h - 10) + "\" text-anchor=\"middle\">" +
           escape(opt.x_label) + "</text>\n";
    return out;
}

inline std::string header(const Frame& f, const ChartOptions& opt) {
    std::string out = open(f, opt);
    out += "<line class=\"axis\" x1=\"" + num(f.left) + "\" y1=\"" + num(f.h - f.bottom) + "\" x2=\"" +
           num(f.w - f.right) + "\" y2=\"" + num(f.h - f.bottom) + "\" stroke=\"black\"/>\n";
    out += "<line class=\"axis\" x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) +
           "\" y2=\"" + num(f.h - f.bottom) + "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = f.y0 + (f.y1 - f.y0) * k / 4.0;
        out += "<text class=\"ytick\" x=\"" + num(f.left - 4) + "\" y=\"" + num(f.py(v) + 4) +
               "\" text-anchor=\"end\">" + num(v) + "</text>\n";
    }
    if (f.y0 < 0 && f.y1 > 0) {
        out += "<line class=\"zero\" x1=\"" + num(f.left) + "\" y1=\"" + num(f.py(0)) + "\" x2=\"" +
               num(f.w - f.right) + "\" y2=\"" + num(f.py(0)) + "\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>\n";
    }
    out += "<text class=\"ylabel\" x=\"14\" y=\"" + num(f.h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           num(f.h / 2) + ")\">" + escape(opt.y_label) + "</text>\n";
    return out;
}

inline std::string legend(const std::vector<Series>& series, const Frame& f) {
    std::string out;
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double y = f.top + 12.0 * static_cast<double>(s);
        out += "<text class=\"legend\" x=\"" + num(f.w - f.right - 4) + "\" y=\"" + num(y) +
               "\" text-anchor=\"end\" fill=\"" + kPalette[s % 6] + "\">" + escape(series[s].name) + "</text>\n";
    }
    return out;
}

} // namespace detail

/// One polyline per series with a circle per finite point.
inline std::string line_chart(const std::vector<Series>& series, const ChartOptions& opt) {
    const auto f = detail::frame_for(series, opt);
    std::string out = detail::header(f, opt);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& sr = series[s];
        const char* colour = detail::kPalette[s % 6];
        std::string pts;
        std::string dots;
        for (std::size_t i = 0; i < sr.x.size(); ++i) {
            if (!std::isfinite(sr.y[i])) continue;
            const auto x = detail::num(f.px(sr.x[i]));
            const auto y = detail::num(f.py(sr.y[i]));
            pts += (pts.empty() ? "" : " ") + x + "," + y;
            dots += "<circle class=\"point\" cx=\"" + x + "\" cy=\"" + y + "\" r=\"1.5\" fill=\"" + colour +
                    "\" data-x=\"" + io::format_double(sr.x[i]) + "\" data-y=\"" + io::format_double(sr.y[i]) +
                    "\"/>\n";
        }
        out += "<polyline class=\"series\" fill=\"none\" stroke=\"" + std::string(colour) + "\" points=\"" + pts +
               "\"/>\n" + dots;
    }
    out += detail::legend(series, f) + "</svg>\n";
    return out;
}

/// Grouped bars: category i of every series side by side. Categories share
/// the x positions 0..n-1 and are labelled with `categories`.
inline std::string bar_chart(const std::vector<std::string>& categories, const std::vector<Series>& series,
                             const ChartOptions& opt) {
    std::vector<Series> framed = series;
    for (auto& s : framed) {
        s.x.resize(s.y.size());
        for (std::size_t i = 0; i < s.x.size(); ++i) s.x[i] = static_cast<double>(i);
    }
    auto f = detail::frame_for(framed, opt);
    f.x0 = -0.5;
    f.x1 = static_cast<double>(categories.size()) - 0.5;
    std::string out = detail::header(f, opt);
    const double slot = (f.px(1) - f.px(0)) * 0.8;
    const double bw = slot / static_cast<double>(std::max<std::size_t>(series.size(), 1));
    for (std::size_t c = 0; c < categories.size(); ++c) {
        out += "<text class=\"xtick\" x=\"" + detail::num(f.px(static_cast<double>(c))) + "\" y=\"" +
               detail::num(f.h - f.bottom + 14) + "\" text-anchor=\"middle\">" + detail::escape(categories[c]) +
               "</text>\n";
    }
    for (std::size_t s = 0; s < framed.size(); ++s) {
        for (std::size_t i = 0; i < framed[s].y.size() && i < categories.size(); ++i) {
            const double v = framed[s].y[i];
            if (!std::isfinite(v)) continue;
            const double x = f.px(static_cast<double>(i)) - slot / 2 + bw * static_cast<double>(s);
            const double y_top = f.py(std::max(v, 0.0));
            const double y_bot = f.py(std::min(v, 0.0));
            out += "<rect class=\"bar\" x=\"" + detail::num(x) + "\" y=\"" + detail::num(y_top) + "\" width=\"" +
                   detail::num(bw) + "\" height=\"" + detail::num(y_bot - y_top) + "\" fill=\"" +
                   detail::kPalette[s % 6] + "\" data-x=\"" + detail::escape(categories[i]) + "\" data-y=\"" +
                   io::format_double(v) + "\"/>\n";
        }
    }
    out += detail::legend(framed, f) + "</svg>\n";
    return out;
}

/// Rows x columns grid of cells shaded from white (low) to dark (high).
/// Absent cells (NaN) are hatched grey.
inline std::string heatmap(const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                           const std::vector<std::vector<double>>& values, const ChartOptions& opt) {
    double lo = 0, hi = 0;
    bool any = false;
    for (const auto& r : values) {
        for (double v : r) {
            if (!std::isfinite(v)) continue;
            lo = any ? std::min(lo, v) : v;
            hi = any ? std::max(hi, v) : v;
            any = true;
        }
    }
    if (hi == lo) hi = lo + 1;
    detail::Frame f;
    f.w = opt.width;
    f.h = opt.height;
    std::string out = detail::open(f, opt);
    const double cw = (f.w - f.left - f.right) / static_cast<double>(std::max<std::size_t>(cols.size(), 1));
    const double ch = (f.h - f.top - f.bottom) / static_cast<double>(std::max<std::size_t>(rows.size(), 1));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out += "<text class=\"rowlabel\" x=\"" + detail::num(f.left - 4) + "\" y=\"" +
               detail::num(f.top + ch * (static_cast<double>(r) + 0.6)) + "\" text-anchor=\"end\">" +
               detail::escape(rows[r]) + "</text>\n";
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const double v = r < values.size() && c < values[r].size() ? values[r][c] : NAN;
            std::string fill = "#cccccc";
            if (std::isfinite(v)) {
                const int shade = static_cast<int>(std::lround(255.0 - 200.0 * (v - lo) / (hi - lo)));
                char buf[8];
                std::snprintf(buf, sizeof buf, "#%02x%02xff", shade, shade);
                fill = buf;
            }
            out += "<rect class=\"cell\" x=\"" + detail::num(f.left + cw * static_cast<double>(c)) + "\" y=\"" +
                   detail::num(f.top + ch * static_cast<double>(r)) + "\" width=\"" + detail::num(cw) +
                   "\" height=\"" + detail::num(ch) + "\" fill=\"" + fill + "\" data-x=\"" + detail::escape(cols[c]) +
                   "\" data-row=\"" + detail::escape(rows[r]) + "\" data-y=\"" +
                   (std::isfinite(v) ? io::format_double(v) : std::string("absent")) + "\"/>\n";
        }
    }
    for (std::size_t c = 0; c < cols.size(); c += std::max<std::size_t>(1, cols.size() / 12)) {
        out += "<text class=\"xtick\" x=\"" + detail::num(f.left + cw * (static_cast<double>(c) + 0.5)) + "\" y=\"" +
               detail::num(f.h - f.bottom + 14) + "\" text-anchor=\"middle\">" + detail::escape(cols[c]) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

} // namespace tempobeat::svg

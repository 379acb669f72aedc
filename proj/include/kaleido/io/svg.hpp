#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kaleido/core/error.hpp"

namespace kaleido::io {

struct ScatterGroup {
    std::string label;
    Eigen::Matrix2Xd points;
};

struct Marker {
    std::string label;
    Eigen::Vector2d position;
};

struct ScatterPlot {
    std::string title;
    std::string x_label = "x";
    std::string y_label = "y";
    std::vector<ScatterGroup> groups;  // one colour each
    std::vector<Marker> markers;       // drawn as crosses
};

struct LineSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<LineSeries> series;
};

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                           "#9467bd", "#8c564b", "#e377c2", "#17becf"};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

/// Maps data bounds onto the plot area with a small margin.
struct Frame {
    double x0, x1, y0, y1;
    static constexpr double kWidth = 640, kHeight = 480, kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;

    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }

    static Frame fit(double xmin, double xmax, double ymin, double ymax) {
        auto widen = [](double& lo, double& hi) {
            if (hi - lo < 1e-12) {
                lo -= 0.5;
                hi += 0.5;
            }
            const double pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        };
        widen(xmin, xmax);
        widen(ymin, ymax);
        return {xmin, xmax, ymin, ymax};
    }
};

inline std::string header(const Frame& f, const std::string& title, const std::string& xl, const std::string& yl) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(Frame::kWidth) + "\" height=\"" +
                    num(Frame::kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const double l = Frame::kLeft, r = Frame::kWidth - Frame::kRight, t = Frame::kTop, b = Frame::kHeight - Frame::kBottom;
    s += "<rect x=\"" + num(l) + "\" y=\"" + num(t) + "\" width=\"" + num(r - l) + "\" height=\"" + num(b - t) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num((l + r) / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
    s += "<text x=\"" + num((l + r) / 2) + "\" y=\"" + num(Frame::kHeight - 15) + "\" text-anchor=\"middle\">" + escape(xl) +
         "</text>\n";
    s += "<text x=\"18\" y=\"" + num((t + b) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num((t + b) / 2) + ")\">" + escape(yl) + "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
        const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
        s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(b + 16) + "\" text-anchor=\"middle\">" + num(xv) + "</text>\n";
        s += "<text x=\"" + num(l - 6) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) + "</text>\n";
    }
    return s;
}

inline std::string legend_entry(int i, const std::string& color, const std::string& label, bool line) {
    const double x = Frame::kWidth - Frame::kRight + 15;
    const double y = Frame::kTop + 10 + 20 * i;
    std::string s = line ? "<line x1=\"" + num(x) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x + 18) + "\" y2=\"" + num(y) +
                               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>"
                         : "<circle cx=\"" + num(x + 9) + "\" cy=\"" + num(y) + "\" r=\"4\" fill=\"" + color + "\"/>";
    return s + "<text x=\"" + num(x + 24) + "\" y=\"" + num(y + 4) + "\">" + escape(label) + "</text>\n";
}

inline void check_finite(double v) { require(std::isfinite(v), "plot coordinates must be finite"); }

}  // namespace detail

/// Self-contained SVG; identical input gives identical bytes.
inline std::string render_scatter(const ScatterPlot& plot) {
    std::size_t total = 0;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    auto extend = [&](double x, double y) {
        detail::check_finite(x);
        detail::check_finite(y);
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    };
    for (const auto& g : plot.groups) {
        total += static_cast<std::size_t>(g.points.cols());
        for (Eigen::Index j = 0; j < g.points.cols(); ++j) extend(g.points(0, j), g.points(1, j));
    }
    require(total > 0, "scatter plot has no points");
    for (const auto& m : plot.markers) extend(m.position.x(), m.position.y());
    const auto f = detail::Frame::fit(xmin, xmax, ymin, ymax);
    std::string s = detail::header(f, plot.title, plot.x_label, plot.y_label);
    const int ncol = static_cast<int>(std::size(kPalette));
    for (std::size_t i = 0; i < plot.groups.size(); ++i) {
        const std::string color = kPalette[i % static_cast<std::size_t>(ncol)];
        s += "<g fill=\"" + color + "\" fill-opacity=\"0.5\">\n";
        const auto& p = plot.groups[i].points;
        for (Eigen::Index j = 0; j < p.cols(); ++j)
            s += "<circle cx=\"" + detail::num(f.px(p(0, j))) + "\" cy=\"" + detail::num(f.py(p(1, j))) + "\" r=\"1.5\"/>\n";
        s += "</g>\n";
        s += detail::legend_entry(static_cast<int>(i), color, plot.groups[i].label, false);
    }
    for (const auto& m : plot.markers) {
        const double x = f.px(m.position.x());
        const double y = f.py(m.position.y());
        s += "<path d=\"M" + detail::num(x - 6) + " " + detail::num(y - 6) + " L" + detail::num(x + 6) + " " +
             detail::num(y + 6) + " M" + detail::num(x - 6) + " " + detail::num(y + 6) + " L" + detail::num(x + 6) + " " +
             detail::num(y - 6) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + detail::num(x + 8) + "\" y=\"" + detail::num(y - 8) + "\">" + detail::escape(m.label) +
             "</text>\n";
    }
    return s + "</svg>\n";
}

inline std::string render_lines(const LinePlot& plot) {
    require(!plot.series.empty(), "line plot has no series");
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& ser : plot.series) {
        require(!ser.x.empty() && ser.x.size() == ser.y.size(), "line series '" + ser.label + "' is empty or ragged");
        for (std::size_t i = 0; i < ser.x.size(); ++i) {
            detail::check_finite(ser.x[i]);
            detail::check_finite(ser.y[i]);
            xmin = std::min(xmin, ser.x[i]);
            xmax = std::max(xmax, ser.x[i]);
            ymin = std::min(ymin, ser.y[i]);
            ymax = std::max(ymax, ser.y[i]);
        }
    }
    const auto f = detail::Frame::fit(xmin, xmax, ymin, ymax);
    std::string s = detail::header(f, plot.title, plot.x_label, plot.y_label);
    const std::size_t ncol = std::size(kPalette);
    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& ser = plot.series[k];
        const std::string color = kPalette[k % ncol];
        std::string pts;
        for (std::size_t i = 0; i < ser.x.size(); ++i)
            pts += (i ? " " : "") + detail::num(f.px(ser.x[i])) + "," + detail::num(f.py(ser.y[i]));
        s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        for (std::size_t i = 0; i < ser.x.size(); ++i)
            s += "<circle cx=\"" + detail::num(f.px(ser.x[i])) + "\" cy=\"" + detail::num(f.py(ser.y[i])) +
                 "\" r=\"3\" fill=\"" + color + "\"/>\n";
        s += detail::legend_entry(static_cast<int>(k), color, ser.label, true);
    }
    return s + "</svg>\n";
}

}  // namespace kaleido::io

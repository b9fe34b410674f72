#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <string>
#include <utility>
#include <vector>

#include "ros/errors.hpp"

namespace ros {

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (x, y)
};

/// Minimal static line chart. Keeps the result harness free of plotting
/// dependencies; the numeric series always ships alongside as text.
inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           const std::vector<PlotSeries>& series) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const PlotSeries& s : series)
        for (auto [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
    double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ofstream out(path);
    if (!out) throw IoError("cannot write plot: " + path);
    out << std::fixed << std::setprecision(2);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    out << "<text x=\"" << (ml + (w - ml - mr) / 2) << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << (mt + (h - mt - mb) / 2)
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << (mt + (h - mt - mb) / 2) << ")\">" << y_label << "</text>\n";
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << w - ml - mr
        << "\" height=\"" << h - mt - mb << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int g = 0; g <= 4; ++g) {
        double yv = ymin + g * (ymax - ymin) / 4.0;
        out << "<line x1=\"" << ml << "\" y1=\"" << py(yv) << "\" x2=\"" << w - mr << "\" y2=\""
            << py(yv) << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << yv << "</text>\n";
        double xv = xmin + g * (xmax - xmin) / 4.0;
        out << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 16
            << "\" text-anchor=\"middle\" font-size=\"11\">" << xv << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (auto [x, y] : series[s].points) out << px(x) << "," << py(y) << " ";
        out << "\"/>\n";
        for (auto [x, y] : series[s].points)
            out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
                << "\"/>\n";
        out << "<text x=\"" << w - mr - 8 << "\" y=\"" << mt + 16 + 16 * static_cast<double>(s)
            << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
            << series[s].name << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace ros

#pragma once

#include <string>
#include <vector>

namespace kpx {

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string csv() const;
};

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct PlotSpec {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
    std::vector<Series> series;
};

// Static SVG line chart (markers and polylines, axes with min/max ticks).
std::string svg_line_plot(const PlotSpec& spec);
// Row-major n1 x n2 field as a grey-scale SVG image with a title.
std::string svg_heatmap(const std::string& title, int n1, int n2, const std::vector<double>& values);

}  // namespace kpx

#include "kpx/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace kpx {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

}  // namespace

std::string Table::csv() const {
    std::ostringstream o;
    for (size_t i = 0; i < columns.size(); ++i) o << (i ? "," : "") << columns[i];
    o << "\n";
    for (const auto& r : rows) {
        for (size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << num(r[i]);
        o << "\n";
    }
    return o.str();
}

std::string svg_line_plot(const PlotSpec& spec) {
    const double W = 640, H = 420, ml = 70, mr = 150, mt = 40, mb = 55;
    auto tx = [&](double v) { return spec.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return spec.logy ? std::log10(v) : v; };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const Series& s : spec.series)
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if ((spec.logx && !(s.x[i] > 0)) || (spec.logy && !(s.y[i] > 0))) continue;
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return mt + ph - (ty(v) - y0) / (y1 - y0) * ph; };
    auto label = [](double v, bool lg) { return lg ? "1e" + num(v) : num(v); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(spec.title) << "</text>\n";
    o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << ml << "\" y=\"" << mt + ph + 18 << "\">" << label(x0, spec.logx) << "</text>\n";
    o << "<text x=\"" << ml + pw << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"end\">" << label(x1, spec.logx) << "</text>\n";
    o << "<text x=\"" << ml - 6 << "\" y=\"" << mt + ph << "\" text-anchor=\"end\">" << label(y0, spec.logy) << "</text>\n";
    o << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 10 << "\" text-anchor=\"end\">" << label(y1, spec.logy) << "</text>\n";
    o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(spec.xlabel) << "</text>\n";
    o << "<text transform=\"translate(16," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(spec.ylabel) << "</text>\n";
    for (size_t k = 0; k < spec.series.size(); ++k) {
        const Series& s = spec.series[k];
        const char* col = kColors[k % 7];
        std::ostringstream pts;
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if ((spec.logx && !(s.x[i] > 0)) || (spec.logy && !(s.y[i] > 0))) continue;
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            pts << px(s.x[i]) << "," << py(s.y[i]) << " ";
            o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
        }
        o << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << col << "\"/>\n";
        o << "<text x=\"" << ml + pw + 10 << "\" y=\"" << mt + 16 + 18 * k << "\" fill=\"" << col << "\">"
          << escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string svg_heatmap(const std::string& title, int n1, int n2, const std::vector<double>& values) {
    const double cell = std::max(2.0, 400.0 / std::max(n1, n2));
    const double W = cell * n2 + 20, H = cell * n1 + 50;
    double lo = INFINITY, hi = -INFINITY;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1.0;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"10\" y=\"20\">" << escape(title) << " [" << num(lo) << ", " << num(hi) << "]</text>\n";
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            const double v = values[static_cast<size_t>(i) * n2 + j];
            const int g = 255 - static_cast<int>(std::lround(255.0 * (v - lo) / (hi - lo)));
            // i1 runs upward
            o << "<rect x=\"" << 10 + cell * j << "\" y=\"" << 40 + cell * (n1 - 1 - i) << "\" width=\"" << cell
              << "\" height=\"" << cell << "\" fill=\"rgb(" << g << "," << g << "," << g << ")\"/>\n";
        }
    o << "</svg>\n";
    return o.str();
}

}  // namespace kpx

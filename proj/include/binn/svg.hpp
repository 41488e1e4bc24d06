#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace binn::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

// Minimal line chart; log axes take log10 of positive values and drop the rest.
inline std::string line_chart(const std::string& title, const std::vector<Series>& series, bool log_x = false,
                              bool log_y = false, int width = 640, int height = 400) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
    auto ok = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!log_x || x > 0) && (!log_y || y > 0);
    };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (ok(s.x[i], s.y[i])) {
                x0 = std::min(x0, tx(s.x[i]));
                x1 = std::max(x1, tx(s.x[i]));
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;

    const double ml = 60, mr = 20, mt = 30, mb = 40;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return mt + ph - (ty(v) - y0) / (y1 - y0) * ph; };

    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" font-family=\"sans-serif\" "
                  "font-size=\"11\">\n",
                  width, height);
    out += buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"18\">%s</text>\n", ml, title.c_str());
    out += buf;
    std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#444\"/>\n",
                  ml, mt, pw, ph);
    out += buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\">%s%.3g</text><text x=\"%g\" y=\"%g\" text-anchor=\"end\">%s%.3g</text>\n",
                  ml, height - 22.0, log_x ? "1e" : "", x0, ml + pw, height - 22.0, log_x ? "1e" : "", x1);
    out += buf;
    std::snprintf(buf, sizeof buf, "<text x=\"4\" y=\"%g\">%s%.3g</text><text x=\"4\" y=\"%g\">%s%.3g</text>\n",
                  mt + ph, log_y ? "1e" : "", y0, mt + 10, log_y ? "1e" : "", y1);
    out += buf;

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* col = colors[k % 6];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!ok(s.x[i], s.y[i])) continue;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
            pts += buf;
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.5\" points=\"" + pts +
               "\"/>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" fill=\"%s\">%s</text>\n", ml + pw - 150,
                      mt + 14.0 * (k + 1), col, s.label.c_str());
        out += buf;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace binn::svg

#include "mlt/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mlt/errors.hpp"
#include "mlt/version.hpp"

namespace mlt::report {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};

std::string escape(const std::string& s) {
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

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

std::string csv_header(const std::string& command, const std::string& config_json) {
    return "# mltlab " + std::string(kVersion) + " " + command + "\n# config " + config_json + "\n";
}

std::string svg_line_chart(const ChartSpec& spec, const std::vector<Series>& series) {
    const double W = 640, H = 400, left = 70, right = 160, top = 40, bottom = 55;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (spec.y_from_zero) y0 = std::min(y0, 0.0);
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" font-family=\"sans-serif\" "
                  "font-size=\"12\">\n",
                  W, H);
    out += buf;
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">", W / 2);
    out += buf + escape(spec.title) + "</text>\n";
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n", left, top,
                  pw, ph);
    out += buf;
    for (int t = 0; t <= 4; ++t) {
        const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">", px(xv), top + ph + 18);
        out += buf + num(xv) + "</text>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">", left - 6, py(yv) + 4);
        out += buf + num(yv) + "</text>\n";
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">", left + pw / 2, H - 12);
    out += buf + escape(spec.x_label) + "</text>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"16\" y=\"%g\" text-anchor=\"middle\" transform=\"rotate(-90 16 %g)\">",
                  top + ph / 2, top + ph / 2);
    out += buf + escape(spec.y_label) + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
        out += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"";
        out += color;
        out += "\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(s.x[i]), py(s.y[i]));
            out += buf;
        }
        out += "\"/>\n";
        const double ly = top + 10 + 18.0 * static_cast<double>(k);
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" stroke-width=\"2\"/>"
                      "<text x=\"%g\" y=\"%g\">",
                      left + pw + 10, ly, left + pw + 30, ly, color, left + pw + 36, ly + 4);
        out += buf + escape(s.label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << content;
    if (!f) throw Error("failed writing " + path);
}

}  // namespace mlt::report

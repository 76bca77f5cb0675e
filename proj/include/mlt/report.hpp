#pragma once

#include <string>
#include <vector>

namespace mlt::report {

// "# tool version" plus the resolved config (one JSON line) as CSV comments.
std::string csv_header(const std::string& command, const std::string& config_json);

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct ChartSpec {
    std::string title, x_label, y_label;
    bool y_from_zero = true;
};

// Self-contained SVG polyline chart, one line per series.
std::string svg_line_chart(const ChartSpec& spec, const std::vector<Series>& series);

void write_file(const std::string& path, const std::string& content);

}  // namespace mlt::report

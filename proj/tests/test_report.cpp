#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mlt/report.hpp"
#include "mlt/version.hpp"

using namespace mlt::report;

TEST_CASE("CSV header carries version and config") {
    const std::string h = csv_header("sq decay", R"({"seed":1})");
    CHECK(h == std::string("# mltlab ") + std::string(mlt::kVersion) + " sq decay\n# config {\"seed\":1}\n");
}

TEST_CASE("SVG line chart") {
    const std::string svg = svg_line_chart({"accuracy", "drop rate", "accuracy"},
                                           {{"B=1", {0.1, 0.5, 0.9}, {0.9, 0.5, 0.2}}, {"B=4", {0.1, 0.9}, {1.0, 0.4}}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("B=4") != std::string::npos);
    std::size_t lines = 0;
    for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
    CHECK(lines == 2);
    CHECK(svg == svg_line_chart({"accuracy", "drop rate", "accuracy"},
                                {{"B=1", {0.1, 0.5, 0.9}, {0.9, 0.5, 0.2}}, {"B=4", {0.1, 0.9}, {1.0, 0.4}}}));
    CHECK(svg_line_chart({"empty", "x", "y"}, {}).find("</svg>") != std::string::npos);
}

TEST_CASE("write_file creates directories") {
    const auto dir = std::filesystem::temp_directory_path() / "mlt_report_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    write_file((dir / "a.txt").string(), "hello\n");
    std::ifstream f(dir / "a.txt");
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == "hello\n");
    std::filesystem::remove_all(dir.parent_path());
}

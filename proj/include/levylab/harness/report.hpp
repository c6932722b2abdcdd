#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace levylab::harness {

/// Shortest text that round-trips the double ("%.17g"), "inf"/"-inf"/"nan" for non-finite values.
std::string fmt(double v);

/// RFC 4180 writer: CRLF line endings, fields quoted when they contain a comma, quote or line break.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& fields);
    void row(const std::vector<double>& values);

private:
    std::ofstream out_;
    std::size_t width_;
};

std::string csv_escape(const std::string& field);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
};

/// Self-contained SVG line plot (axes, ticks, legend); non-finite or non-positive-on-log points are skipped.
void write_svg_plot(const std::string& path, const PlotSpec& spec, const std::vector<Series>& series);

std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

void ensure_directory(const std::string& dir);

} // namespace levylab::harness

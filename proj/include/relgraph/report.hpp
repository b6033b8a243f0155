#pragma once

#include "relgraph/analysis.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace relgraph::report {

/// Shortest locale-independent form with at most 9 significant digits.
std::string format_number(double value);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> row);
    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// RFC-4180 reader: header row required, quoted fields supported.
CsvTable parse_csv(const std::string& text);

/// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// --- SVG -------------------------------------------------------------------

enum class Axis { Left, Right };

struct Series {
    std::string label;
    std::vector<XY> points;
    std::string color = "#1f77b4";
    bool line = false;
    bool highlight = false;
    Axis axis = Axis::Left;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    // Only drawn when some series uses the right axis.
    std::string y2_label;
    std::vector<Series> series;
};

std::string render_svg(const Chart& chart);

const std::vector<std::string>& palette();

} // namespace relgraph::report

#include "relgraph/report.hpp"

#include "relgraph/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <system_error>

namespace relgraph::report {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 9);
    std::string text(buf, res.ptr);
    // Trim trailing zeros of the mantissa ("0.500000000" -> "0.5").
    const auto exp_pos = text.find_first_of("eE");
    std::string mantissa = text.substr(0, exp_pos);
    const std::string exponent = exp_pos == std::string::npos ? "" : text.substr(exp_pos);
    if (mantissa.find('.') != std::string::npos) {
        while (!mantissa.empty() && mantissa.back() == '0') mantissa.pop_back();
        if (!mantissa.empty() && mantissa.back() == '.') mantissa.pop_back();
    }
    return mantissa + exponent;
}

namespace {

std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string escape_xml(const std::string& text) {
    std::string out;
    for (char c : text) {
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

} // namespace

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) {
        throw Error(ErrorKind::InvalidArgument, "CSV row has " + std::to_string(row.size()) + " fields, header has " +
                                                    std::to_string(header_.size()));
    }
    rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
    std::string out;
    const auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += quote(row[i]);
        }
        out += "\r\n";
    };
    emit(header_);
    for (const auto& row : rows_) emit(row);
    return out;
}

CsvTable parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started) throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": stray quote");
            quoted = true;
            field_started = true;
            break;
        case ',':
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
            break;
        case '\r':
            break;
        case '\n':
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
            if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
            record.clear();
            ++line;
            break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw Error(ErrorKind::ParseError, "unterminated quoted field");
    if (field_started || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    if (records.empty()) throw Error(ErrorKind::ParseError, "CSV has no header");

    CsvTable table(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header().size()) {
            throw Error(ErrorKind::ParseError, "record " + std::to_string(r + 1) + " has " +
                                                   std::to_string(records[r].size()) + " fields");
        }
        table.add_row(std::move(records[r]));
    }
    return table;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot rename onto '" + path.string() + "'");
    }
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return colors;
}

namespace {

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12) {
            const double d = std::max(std::abs(lo) * 0.05, 0.5);
            lo -= d;
            hi += d;
        }
        const double margin = (hi - lo) * 0.05;
        lo -= margin;
        hi += margin;
    }
};

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 80, kRight = 80, kTop = 50, kBottom = 60;

} // namespace

std::string render_svg(const Chart& chart) {
    Range xr, yl, yr;
    bool has_right = false;
    for (const auto& s : chart.series) {
        for (const auto& p : s.points) {
            xr.add(p.x);
            (s.axis == Axis::Left ? yl : yr).add(p.y);
        }
        has_right = has_right || s.axis == Axis::Right;
    }
    xr.pad();
    yl.pad();
    yr.pad();

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    const auto sy = [&](double y, Axis axis) {
        const Range& r = axis == Axis::Left ? yl : yr;
        return kTop + plot_h - (y - r.lo) / (r.hi - r.lo) * plot_h;
    };
    const auto num = [](double v) { return format_number(std::round(v * 100.0) / 100.0); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           escape_xml(chart.title) + "</text>\n";
    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(plot_w) + "\" height=\"" +
           num(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";

    constexpr int ticks = 5;
    for (int t = 0; t <= ticks; ++t) {
        const double fx = xr.lo + (xr.hi - xr.lo) * t / ticks;
        const double px = sx(fx);
        svg += "<line x1=\"" + num(px) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" + num(px) + "\" y2=\"" +
               num(kTop + plot_h + 5) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(px) + "\" y=\"" + num(kTop + plot_h + 18) + "\" text-anchor=\"middle\">" +
               format_number(std::round(fx * 1e4) / 1e4) + "</text>\n";

        const double fy = yl.lo + (yl.hi - yl.lo) * t / ticks;
        const double py = sy(fy, Axis::Left);
        svg += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(py) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(py) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" +
               format_number(std::round(fy * 1e4) / 1e4) + "</text>\n";
        if (has_right) {
            const double fy2 = yr.lo + (yr.hi - yr.lo) * t / ticks;
            const double py2 = sy(fy2, Axis::Right);
            svg += "<line x1=\"" + num(kLeft + plot_w) + "\" y1=\"" + num(py2) + "\" x2=\"" + num(kLeft + plot_w + 5) +
                   "\" y2=\"" + num(py2) + "\" stroke=\"black\"/>\n";
            svg += "<text x=\"" + num(kLeft + plot_w + 8) + "\" y=\"" + num(py2 + 4) + "\">" +
                   format_number(std::round(fy2 * 1e4) / 1e4) + "</text>\n";
        }
    }
    svg += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"" + num(kHeight - 15) + "\" text-anchor=\"middle\">" +
           escape_xml(chart.x_label) + "</text>\n";
    svg += "<text transform=\"translate(20," + num(kTop + plot_h / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape_xml(chart.y_label) + "</text>\n";
    if (has_right) {
        svg += "<text transform=\"translate(" + num(kWidth - 15) + "," + num(kTop + plot_h / 2) +
               ") rotate(90)\" text-anchor=\"middle\">" + escape_xml(chart.y2_label) + "</text>\n";
    }

    double legend_y = kTop + 14;
    for (const auto& s : chart.series) {
        if (s.line) {
            std::string path;
            for (const auto& p : s.points) {
                if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
                path += (path.empty() ? "M" : " L") + num(sx(p.x)) + " " + num(sy(p.y, s.axis));
            }
            if (!path.empty()) {
                svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"/>\n";
            }
        } else {
            for (const auto& p : s.points) {
                if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
                const std::string r = s.highlight ? "7" : "4";
                svg += "<circle cx=\"" + num(sx(p.x)) + "\" cy=\"" + num(sy(p.y, s.axis)) + "\" r=\"" + r +
                       "\" fill=\"" + s.color + "\"" + (s.highlight ? " stroke=\"black\" stroke-width=\"2\"" : "") +
                       "/>\n";
            }
        }
        if (!s.label.empty()) {
            svg += "<rect x=\"" + num(kLeft + 10) + "\" y=\"" + num(legend_y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
                   s.color + "\"/>\n";
            svg += "<text x=\"" + num(kLeft + 25) + "\" y=\"" + num(legend_y) + "\">" + escape_xml(s.label) + "</text>\n";
            legend_y += 16;
        }
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace relgraph::report

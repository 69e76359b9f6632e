#pragma once

// Minimal SVG plotting for the CSV files the CLI writes: a (charge, strength)
// scatter, or one polyline per column against the first column.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "groupnet/train.hpp"

namespace groupnet {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Numeric CSV with a header row. Blank lines are skipped; a non-numeric
/// cell is a config error naming the line.
inline CsvTable parse_csv(const std::string& text, const std::string& origin = "csv") {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                              " columns, found " + std::to_string(cells.size()));
        std::vector<double> row;
        for (const auto& c : cells) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception&) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

enum class PlotKind { scatter, lines };

struct PlotSpec {
    PlotKind kind = PlotKind::lines;
    std::string x_label;
    std::string y_label;
    std::vector<std::size_t> series;  // y columns
};

/// (charge, strength) tables scatter; metrics logs draw each loss term;
/// anything else plots every column against the first.
inline PlotSpec choose_plot(const CsvTable& t) {
    PlotSpec p;
    auto col = [&](const std::string& name) {
        auto it = std::find(t.header.begin(), t.header.end(), name);
        return it == t.header.end() ? t.header.size() : static_cast<std::size_t>(it - t.header.begin());
    };
    if (col("charge") == 0 && col("strength") < t.header.size()) {
        p.kind = PlotKind::scatter;
        p.x_label = "charge";
        p.y_label = "strength";
        p.series = {col("strength")};
        return p;
    }
    p.x_label = t.header.empty() ? "x" : t.header[0];
    const bool metrics = !t.header.empty() && t.header[0] == "epoch";
    p.y_label = metrics ? "loss" : "value";
    for (std::size_t c = 1; c < t.header.size(); ++c)
        if (!(metrics && t.header[c] == "lr")) p.series.push_back(c);
    return p;
}

inline std::string svg_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

inline std::string render_svg(const CsvTable& t, const PlotSpec& p, const std::string& title = "") {
    constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 60;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool any = false;
    for (const auto& row : t.rows)
        for (std::size_t c : p.series) {
            const double x = row[0], y = row[c];
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (!any) {
                x0 = x1 = x;
                y0 = y1 = y;
                any = true;
            }
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (x1 - x0 < 1e-12) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if (y1 - y0 < 1e-12) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
          << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
        o << "<text x=\"" << svg_number(sx(fx)) << "\" y=\"" << H - B + 18
          << "\" text-anchor=\"middle\" font-size=\"11\">" << format_double(std::round(fx * 1e4) / 1e4) << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << svg_number(sy(fy) + 4)
          << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(std::round(fy * 1e4) / 1e4) << "</text>\n";
    }
    o << "<text class=\"x-label\" x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(p.x_label) << "</text>\n";
    o << "<text class=\"y-label\" x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
      << "transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">" << xml_escape(p.y_label) << "</text>\n";

    for (std::size_t k = 0; k < p.series.size(); ++k) {
        const std::size_t c = p.series[k];
        const char* colour = palette[k % std::size(palette)];
        if (p.kind == PlotKind::scatter) {
            for (const auto& row : t.rows)
                if (std::isfinite(row[0]) && std::isfinite(row[c]))
                    o << "<circle cx=\"" << svg_number(sx(row[0])) << "\" cy=\"" << svg_number(sy(row[c]))
                      << "\" r=\"2.5\" fill=\"" << colour << "\" fill-opacity=\"0.7\"/>\n";
        } else {
            o << "<polyline class=\"series\" data-name=\"" << xml_escape(t.header[c]) << "\" fill=\"none\" stroke=\""
              << colour << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (const auto& row : t.rows) {
                if (!std::isfinite(row[0]) || !std::isfinite(row[c])) continue;
                o << (first ? "" : " ") << svg_number(sx(row[0])) << "," << svg_number(sy(row[c]));
                first = false;
            }
            o << "\"/>\n";
        }
        o << "<text x=\"" << W - R + 12 << "\" y=\"" << T + 16 * (k + 1) << "\" font-size=\"12\" fill=\"" << colour
          << "\">" << xml_escape(t.header[c]) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace groupnet

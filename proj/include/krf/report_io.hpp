#pragma once

// Deterministic report emitters: CSV (17 significant digits, round-trip exact
// for doubles), JSON (stable key order via ordered_json), and self-contained
// SVG line plots. Number formatting goes through std::to_chars, so output
// bytes are locale-independent and reproducible.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace krf {

using ordered_json = nlohmann::ordered_json;

inline std::string format_double(double v, int precision = 17) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, precision);
    return std::string(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// CSV

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) body_ += ',';
            body_ += header[i];
        }
        body_ += '\n';
    }

    void row(std::span<const double> values) {
        if (values.size() != cols_) throw std::invalid_argument("CsvWriter: column count mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) body_ += ',';
            body_ += format_double(values[i]);
        }
        body_ += '\n';
    }

    /// Row with a leading non-numeric cell (e.g. a label).
    void row(const std::string& label, std::span<const double> values) {
        body_ += label;
        for (double v : values) {
            body_ += ',';
            body_ += format_double(v);
        }
        body_ += '\n';
    }

    const std::string& str() const { return body_; }
    void save(const std::filesystem::path& p) const { write_text_file(p, body_); }

private:
    std::size_t cols_;
    std::string body_;
};

// ---------------------------------------------------------------------------
// SVG line plots (single file, no external assets)

struct SvgSeries {
    std::string label;
    std::string color = "#1f6fb2";
    std::vector<double> x, y;
};

class SvgPlot {
public:
    SvgPlot(std::string title, std::string xlabel, std::string ylabel)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

    void add(SvgSeries s) { series_.push_back(std::move(s)); }

    std::string render() const {
        const double W = 820, H = 520, ml = 70, mr = 180, mt = 40, mb = 55;
        double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
        bool first = true;
        for (const auto& s : series_)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                if (first) {
                    xmin = xmax = s.x[i];
                    ymin = ymax = s.y[i];
                    first = false;
                } else {
                    xmin = std::min(xmin, s.x[i]);
                    xmax = std::max(xmax, s.x[i]);
                    ymin = std::min(ymin, s.y[i]);
                    ymax = std::max(ymax, s.y[i]);
                }
            }
        if (xmax <= xmin) xmax = xmin + 1;
        if (ymax <= ymin) ymax = ymin + 1;
        const double px0 = ml, px1 = W - mr, py0 = H - mb, py1 = mt;
        auto X = [&](double x) { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); };
        auto Y = [&](double y) { return py0 + (y - ymin) / (ymax - ymin) * (py1 - py0); };

        std::string svg;
        svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_double(W, 6) + "\" height=\"" +
               format_double(H, 6) + "\" viewBox=\"0 0 " + format_double(W, 6) + " " + format_double(H, 6) + "\">\n";
        svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        svg += "<text x=\"" + format_double(W / 2, 6) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
               title_ + "</text>\n";
        // axes
        svg += "<line x1=\"" + format_double(px0, 8) + "\" y1=\"" + format_double(py0, 8) + "\" x2=\"" +
               format_double(px1, 8) + "\" y2=\"" + format_double(py0, 8) + "\" stroke=\"black\"/>\n";
        svg += "<line x1=\"" + format_double(px0, 8) + "\" y1=\"" + format_double(py0, 8) + "\" x2=\"" +
               format_double(px0, 8) + "\" y2=\"" + format_double(py1, 8) + "\" stroke=\"black\"/>\n";
        for (int k = 0; k <= 5; ++k) {
            const double fx = xmin + (xmax - xmin) * k / 5.0;
            const double fy = ymin + (ymax - ymin) * k / 5.0;
            svg += "<line x1=\"" + format_double(X(fx), 8) + "\" y1=\"" + format_double(py0, 8) + "\" x2=\"" +
                   format_double(X(fx), 8) + "\" y2=\"" + format_double(py0 + 5, 8) + "\" stroke=\"black\"/>\n";
            svg += "<text x=\"" + format_double(X(fx), 8) + "\" y=\"" + format_double(py0 + 20, 8) +
                   "\" text-anchor=\"middle\" font-size=\"11\">" + format_double(fx, 6) + "</text>\n";
            svg += "<line x1=\"" + format_double(px0 - 5, 8) + "\" y1=\"" + format_double(Y(fy), 8) + "\" x2=\"" +
                   format_double(px0, 8) + "\" y2=\"" + format_double(Y(fy), 8) + "\" stroke=\"black\"/>\n";
            svg += "<text x=\"" + format_double(px0 - 9, 8) + "\" y=\"" + format_double(Y(fy) + 4, 8) +
                   "\" text-anchor=\"end\" font-size=\"11\">" + format_double(fy, 6) + "</text>\n";
        }
        svg += "<text x=\"" + format_double((px0 + px1) / 2, 8) + "\" y=\"" + format_double(H - 12, 8) +
               "\" text-anchor=\"middle\" font-size=\"13\">" + xlabel_ + "</text>\n";
        svg += "<text x=\"18\" y=\"" + format_double((py0 + py1) / 2, 8) +
               "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
               format_double((py0 + py1) / 2, 8) + ")\">" + ylabel_ + "</text>\n";
        // series
        int li = 0;
        for (const auto& s : series_) {
            std::string pts;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                pts += format_double(X(s.x[i]), 8) + "," + format_double(Y(s.y[i]), 8) + " ";
            }
            svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" + pts +
                   "\"/>\n";
            const double ly = mt + 18.0 * li;
            svg += "<line x1=\"" + format_double(px1 + 12, 8) + "\" y1=\"" + format_double(ly, 8) + "\" x2=\"" +
                   format_double(px1 + 40, 8) + "\" y2=\"" + format_double(ly, 8) + "\" stroke=\"" + s.color +
                   "\" stroke-width=\"2\"/>\n";
            svg += "<text x=\"" + format_double(px1 + 46, 8) + "\" y=\"" + format_double(ly + 4, 8) +
                   "\" font-size=\"12\">" + s.label + "</text>\n";
            ++li;
        }
        svg += "</svg>\n";
        return svg;
    }

    void save(const std::filesystem::path& p) const { write_text_file(p, render()); }

private:
    std::string title_, xlabel_, ylabel_;
    std::vector<SvgSeries> series_;
};

}  // namespace krf

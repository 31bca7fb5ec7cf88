#include "pxcl/results.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pxcl {

std::string fmt_double(double value) {
    char buf[32];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), value);
    if (res.ec != std::errc()) throw std::runtime_error("fmt_double: conversion failed");
    return std::string(buf, res.ptr);
}

namespace {

// Fixed two decimals for SVG coordinates and labels.
std::string fixed2(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return std::string(buf);
}

void append_matrix_rows(std::ostringstream& out, const std::string& run_label,
                        const AccuracyMatrix& matrix, std::size_t num_domains) {
    for (std::size_t t = 0; t < matrix.stages(); ++t) {
        out << run_label << ',' << (t + 1);
        for (std::size_t j = 0; j < num_domains; ++j) {
            out << ',';
            if (j < matrix.rows[t].size()) out << fmt_double(matrix.rows[t][j]);
        }
        out << '\n';
    }
}

std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
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

}  // namespace

std::string accuracy_matrix_csv(const RunSummary& summary) {
    if (summary.runs.empty()) throw std::invalid_argument("accuracy_matrix_csv: no runs");
    const std::vector<std::string>& names = summary.mean_matrix.domain_names;
    std::ostringstream out;
    out << "run,stage";
    for (const std::string& name : names) out << ',' << name;
    out << '\n';
    for (std::size_t r = 0; r < summary.runs.size(); ++r)
        append_matrix_rows(out, std::to_string(r + 1), summary.runs[r].matrix, names.size());
    append_matrix_rows(out, "mean", summary.mean_matrix, names.size());
    return out.str();
}

std::string summary_csv(const std::vector<std::pair<Strategy, RunSummary>>& summaries) {
    if (summaries.empty()) throw std::invalid_argument("summary_csv: no strategies");
    std::ostringstream out;
    out << "strategy,run,avg_accuracy,avg_forgetting\n";
    for (const auto& [strategy, summary] : summaries) {
        const char* name = strategy_name(strategy);
        for (std::size_t r = 0; r < summary.runs.size(); ++r)
            out << name << ',' << (r + 1) << ',' << fmt_double(summary.runs[r].average_accuracy)
                << ',' << fmt_double(summary.runs[r].average_forgetting) << '\n';
        out << name << ",mean," << fmt_double(summary.mean_accuracy) << ','
            << fmt_double(summary.mean_forgetting) << '\n';
        if (summary.runs.size() > 1)
            out << name << ",std," << fmt_double(summary.std_accuracy) << ','
                << fmt_double(summary.std_forgetting) << '\n';
    }
    return out.str();
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    if (points.empty()) throw std::invalid_argument("sweep_csv: no points");
    std::ostringstream out;
    out << "capacity,mean_avg_accuracy,std_avg_accuracy\n";
    for (const SweepPoint& p : points)
        out << p.capacity << ',' << fmt_double(p.mean_accuracy) << ','
            << fmt_double(p.std_accuracy) << '\n';
    return out.str();
}

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 24.0;
constexpr double kTop = 48.0;
constexpr double kBottom = 56.0;

// y axis fixed to 0..100 percent.
double y_pos(double percent) {
    const double plot_h = kHeight - kTop - kBottom;
    return kTop + plot_h * (1.0 - percent / 100.0);
}

void open_svg(std::ostringstream& out, const std::string& title) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
        << "  <rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
        << "  <text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title) << "</text>\n";
    for (int p = 0; p <= 100; p += 20) {
        const double y = y_pos(p);
        out << "  <line x1=\"" << kLeft << "\" y1=\"" << fixed2(y) << "\" x2=\""
            << kWidth - kRight << "\" y2=\"" << fixed2(y)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
            << "  <text x=\"" << kLeft - 8 << "\" y=\"" << fixed2(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << p
            << "</text>\n";
    }
    out << "  <line x1=\"" << kLeft << "\" y1=\"" << fixed2(y_pos(0)) << "\" x2=\""
        << kWidth - kRight << "\" y2=\"" << fixed2(y_pos(0))
        << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
}

}  // namespace

std::string bar_chart_svg(const std::string& title,
                          const std::vector<std::pair<std::string, double>>& bars) {
    if (bars.empty()) throw std::invalid_argument("bar_chart_svg: no bars");
    std::ostringstream out;
    open_svg(out, title);
    const double plot_w = kWidth - kLeft - kRight;
    const double slot = plot_w / static_cast<double>(bars.size());
    const double bar_w = slot * 0.6;
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& [label, value] = bars[i];
        const double x = kLeft + slot * (static_cast<double>(i) + 0.5);
        const double top = y_pos(value);
        out << "  <rect x=\"" << fixed2(x - bar_w / 2) << "\" y=\"" << fixed2(top) << "\" width=\""
            << fixed2(bar_w) << "\" height=\"" << fixed2(y_pos(0) - top)
            << "\" fill=\"#4878a8\"/>\n"
            << "  <text x=\"" << fixed2(x) << "\" y=\"" << fixed2(top - 6)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << fixed2(value) << "</text>\n"
            << "  <text x=\"" << fixed2(x) << "\" y=\"" << fixed2(kHeight - kBottom + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << xml_escape(label) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::vector<std::pair<double, double>>& points) {
    if (points.empty()) throw std::invalid_argument("line_chart_svg: no points");
    std::ostringstream out;
    open_svg(out, title);
    const double x_min = points.front().first;
    const double x_max = points.back().first;
    const double span = x_max > x_min ? x_max - x_min : 1.0;
    const double plot_w = kWidth - kLeft - kRight;
    auto x_pos = [&](double x) { return kLeft + plot_w * ((x - x_min) / span); };

    std::ostringstream path;
    for (std::size_t i = 0; i < points.size(); ++i)
        path << (i == 0 ? "M" : " L") << fixed2(x_pos(points[i].first)) << ' '
             << fixed2(y_pos(points[i].second));
    out << "  <path d=\"" << path.str() << "\" fill=\"none\" stroke=\"#4878a8\" stroke-width=\"2\"/>\n";
    for (const auto& [x, y] : points) {
        out << "  <circle cx=\"" << fixed2(x_pos(x)) << "\" cy=\"" << fixed2(y_pos(y))
            << "\" r=\"3.5\" fill=\"#4878a8\"/>\n"
            << "  <text x=\"" << fixed2(x_pos(x)) << "\" y=\"" << fixed2(y_pos(y) - 10)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fixed2(y)
            << "</text>\n"
            << "  <text x=\"" << fixed2(x_pos(x)) << "\" y=\"" << fixed2(kHeight - kBottom + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_double(x) << "</text>\n";
    }
    out << "  <text x=\"" << kWidth / 2 << "\" y=\"" << fixed2(kHeight - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << xml_escape(x_label) << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write: " + path.string());
}

}  // namespace pxcl

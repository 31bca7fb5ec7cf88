#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pxcl/trainer.hpp"

namespace pxcl {

// Shortest decimal rendering that round-trips the exact double. Keeps CSV
// output byte-stable across runs and re-parseable without loss.
std::string fmt_double(double value);

// Accuracy matrix CSV: header run,stage,<domain...>; one row per (run, stage)
// with empty cells right of the diagonal, then the cross-run mean matrix as
// rows with run = "mean".
std::string accuracy_matrix_csv(const RunSummary& summary);

// Summary CSV: header strategy,run,avg_accuracy,avg_forgetting; per-run rows
// numbered from 1, then mean rows, plus std rows when more than one run.
std::string summary_csv(const std::vector<std::pair<Strategy, RunSummary>>& summaries);

struct SweepPoint {
    std::size_t capacity = 0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

// Sweep CSV: header capacity,mean_avg_accuracy,std_avg_accuracy.
std::string sweep_csv(const std::vector<SweepPoint>& points);

// Self-contained SVG bar chart of percentages (0..100 y axis).
std::string bar_chart_svg(const std::string& title,
                          const std::vector<std::pair<std::string, double>>& bars);

// Self-contained SVG line chart; points are (x, percent) pairs sorted by x.
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::vector<std::pair<double, double>>& points);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace pxcl

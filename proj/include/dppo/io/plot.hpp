#pragma once

#include "dppo/algo/evaluate.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dppo::io {

enum class PlotQuantity { mean_return, early_termination, tracking_error };

/// One evaluation report drawn as one line.
struct PlotSeries {
  std::string label;
  std::vector<algo::EvalRow> rows;
};

/// Line colours, assigned to series in order and reused cyclically.
inline constexpr const char* kSeriesColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

/// Standalone SVG 1.1 line chart of `quantity` against beta on a 640x360
/// viewBox. Each series gets a shaded 95% band when it has more than one
/// episode per beta.
std::string render_svg(const std::vector<PlotSeries>& series, PlotQuantity quantity);

/// Writes return_vs_beta.svg, early_termination_vs_beta.svg and
/// tracking_error_vs_beta.svg into `out_dir`; returns their paths.
std::vector<std::filesystem::path> write_plots(const std::vector<PlotSeries>& series,
                                               const std::filesystem::path& out_dir);

}  // namespace dppo::io

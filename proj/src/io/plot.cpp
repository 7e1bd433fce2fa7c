#include "dppo/io/plot.hpp"

#include "dppo/io/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dppo::io {

namespace {

constexpr double kWidth = 640.0, kHeight = 360.0;
constexpr double kLeft = 64.0, kRight = 150.0, kTop = 36.0, kBottom = 48.0;

const algo::Interval& pick(const algo::EvalRow& row, PlotQuantity q) {
  switch (q) {
    case PlotQuantity::early_termination: return row.early_termination;
    case PlotQuantity::tracking_error: return row.tracking_error;
    case PlotQuantity::mean_return: break;
  }
  return row.episode_return;
}

const char* title(PlotQuantity q) {
  switch (q) {
    case PlotQuantity::early_termination: return "Early-termination fraction";
    case PlotQuantity::tracking_error: return "Tracking error";
    case PlotQuantity::mean_return: break;
  }
  return "Mean undiscounted return";
}

std::string escape(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish(double pad_fraction) {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double pad = (hi - lo) * pad_fraction;
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series, PlotQuantity quantity) {
  if (series.empty()) throw std::invalid_argument("plot needs at least one report");
  Range xr, yr;
  for (const auto& s : series) {
    if (s.rows.empty()) throw std::invalid_argument("report '" + s.label + "' has an empty beta grid");
    for (const auto& row : s.rows) {
      const auto& v = pick(row, quantity);
      if (!std::isfinite(row.beta) || !std::isfinite(v.mean) || !std::isfinite(v.ci95)) {
        throw std::invalid_argument("report '" + s.label + "' contains a non-finite value");
      }
      xr.add(row.beta);
      yr.add(v.mean - v.ci95);
      yr.add(v.mean + v.ci95);
    }
  }
  xr.finish(0.0);
  yr.finish(0.05);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"360\" "
         "viewBox=\"0 0 640 360\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"360\" fill=\"#ffffff\"/>\n"
      << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title(quantity) << " vs risk parameter</text>\n";

  // Axes and ticks.
  svg << "<g stroke=\"#444444\" stroke-width=\"1\">\n"
      << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
      << num(kTop + ph) << "\"/>\n"
      << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
      << num(kTop + ph) << "\"/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i < kTicks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / (kTicks - 1);
    const double fy = yr.lo + (yr.hi - yr.lo) * i / (kTicks - 1);
    svg << "<line x1=\"" << num(px(fx)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(fx)) << "\" y2=\""
        << num(kTop + ph + 4) << "\"/>\n"
        << "<line x1=\"" << num(kLeft - 4) << "\" y1=\"" << num(py(fy)) << "\" x2=\"" << num(kLeft) << "\" y2=\""
        << num(py(fy)) << "\"/>\n";
  }
  svg << "</g>\n<g fill=\"#222222\">\n";
  for (int i = 0; i < kTicks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / (kTicks - 1);
    const double fy = yr.lo + (yr.hi - yr.lo) * i / (kTicks - 1);
    svg << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(kTop + ph + 16) << "\" text-anchor=\"middle\">"
        << tick_label(fx) << "</text>\n"
        << "<text x=\"" << num(kLeft - 7) << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\">"
        << tick_label(fy) << "</text>\n";
  }
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10)
      << "\" text-anchor=\"middle\">beta</text>\n</g>\n";

  const std::size_t palette = std::size(kSeriesColours);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kSeriesColours[k % palette];
    std::vector<algo::EvalRow> rows = s.rows;
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.beta < b.beta; });
    const bool band = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.episodes > 1; });

    svg << "<g class=\"series\">\n";
    if (band) {
      svg << "<polygon class=\"ci95\" fill=\"" << colour << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (const auto& r : rows) svg << num(px(r.beta)) << ',' << num(py(pick(r, quantity).mean + pick(r, quantity).ci95)) << ' ';
      for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
        svg << num(px(it->beta)) << ',' << num(py(pick(*it, quantity).mean - pick(*it, quantity).ci95)) << ' ';
      }
      svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (const auto& r : rows) svg << num(px(r.beta)) << ',' << num(py(pick(r, quantity).mean)) << ' ';
    svg << "\"/>\n";
    for (const auto& r : rows) {
      svg << "<circle cx=\"" << num(px(r.beta)) << "\" cy=\"" << num(py(pick(r, quantity).mean))
          << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
    }
    const double ly = kTop + 12 + 18 * static_cast<double>(k);
    svg << "<line x1=\"" << num(kWidth - kRight + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(kWidth - kRight + 32) << "\" y2=\"" << num(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << num(kWidth - kRight + 38) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label)
        << "</text>\n</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> write_plots(const std::vector<PlotSeries>& series,
                                               const std::filesystem::path& out_dir) {
  const std::pair<PlotQuantity, const char*> charts[] = {
      {PlotQuantity::mean_return, "return_vs_beta.svg"},
      {PlotQuantity::early_termination, "early_termination_vs_beta.svg"},
      {PlotQuantity::tracking_error, "tracking_error_vs_beta.svg"},
  };
  std::vector<std::string> docs;
  for (const auto& [q, name] : charts) docs.push_back(render_svg(series, q));
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    paths.push_back(out_dir / charts[i].second);
    write_text_file(paths.back(), docs[i]);
  }
  return paths;
}

}  // namespace dppo::io

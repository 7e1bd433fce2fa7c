#pragma once

#include "dppo/algo/evaluate.hpp"
#include "dppo/algo/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace dppo::io {

/// `zero_wall_clock` writes wall_seconds as 0 so that reruns are byte-identical.
nlohmann::json to_json(const algo::MetricsRecord& rec, bool zero_wall_clock = false);
algo::MetricsRecord metrics_from_json(const nlohmann::json& j);

/// Appends one JSON line per record and flushes after each.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, bool zero_wall_clock);
  void write(const algo::MetricsRecord& rec);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  bool zero_wall_clock_;
};

/// Parses every complete line; an unterminated final line is skipped.
std::vector<algo::MetricsRecord> read_metrics(const std::filesystem::path& path);

nlohmann::json eval_report_to_json(const std::vector<algo::EvalRow>& rows);
/// Throws std::invalid_argument for anything but a non-empty array of rows.
std::vector<algo::EvalRow> eval_report_from_json(const nlohmann::json& j);

}  // namespace dppo::io

#include "dppo/io/metrics.hpp"

#include <sstream>
#include <stdexcept>

namespace dppo::io {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

json to_json(const algo::MetricsRecord& rec, bool zero_wall_clock) {
  json buckets = json::array();
  for (const auto& b : rec.bucket_returns) buckets.push_back(optional_number(b));
  return json{
      {"iteration", rec.iteration},
      {"env_steps", rec.env_steps},
      {"episodes", rec.episodes},
      {"mean_return", optional_number(rec.mean_return)},
      {"early_termination", optional_number(rec.early_termination)},
      {"policy_loss", rec.stats.policy_loss},
      {"critic_loss", rec.stats.critic_loss},
      {"approx_kl", rec.stats.approx_kl},
      {"clip_fraction", rec.stats.clip_fraction},
      {"wall_seconds", zero_wall_clock ? 0.0 : rec.wall_seconds},
      {"beta_bucket_returns", buckets},
  };
}

algo::MetricsRecord metrics_from_json(const json& j) {
  algo::MetricsRecord rec;
  rec.iteration = j.at("iteration").get<int>();
  rec.env_steps = j.at("env_steps").get<std::int64_t>();
  rec.episodes = j.at("episodes").get<int>();
  rec.mean_return = read_optional(j.at("mean_return"));
  rec.early_termination = read_optional(j.at("early_termination"));
  rec.stats.policy_loss = j.at("policy_loss").get<double>();
  rec.stats.critic_loss = j.at("critic_loss").get<double>();
  rec.stats.approx_kl = j.at("approx_kl").get<double>();
  rec.stats.clip_fraction = j.at("clip_fraction").get<double>();
  rec.wall_seconds = j.at("wall_seconds").get<double>();
  const auto& buckets = j.at("beta_bucket_returns");
  if (!buckets.is_array() || buckets.size() != rec.bucket_returns.size()) {
    throw std::invalid_argument("metrics record: beta_bucket_returns must have " +
                                std::to_string(rec.bucket_returns.size()) + " entries");
  }
  for (std::size_t b = 0; b < rec.bucket_returns.size(); ++b) rec.bucket_returns[b] = read_optional(buckets[b]);
  return rec;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool zero_wall_clock)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), zero_wall_clock_(zero_wall_clock) {
  if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
}

void MetricsWriter::write(const algo::MetricsRecord& rec) {
  out_ << to_json(rec, zero_wall_clock_).dump() << '\n';
  if (!out_.flush()) throw std::runtime_error("write to '" + path_.string() + "' failed");
}

std::vector<algo::MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<algo::MetricsRecord> records;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string::npos) break;  // truncated tail
    ++line_no;
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    try {
      records.push_back(metrics_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw std::invalid_argument("'" + path.string() + "' line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

json eval_report_to_json(const std::vector<algo::EvalRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back(r);
  return out;
}

std::vector<algo::EvalRow> eval_report_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("evaluation report must be a JSON array");
  if (j.empty()) throw std::invalid_argument("evaluation report has an empty beta grid");
  std::vector<algo::EvalRow> rows;
  try {
    for (const auto& r : j) rows.push_back(r.get<algo::EvalRow>());
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed evaluation row: ") + e.what());
  }
  return rows;
}

}  // namespace dppo::io

#pragma once

#include "dppo/algo/agent.hpp"
#include "dppo/algo/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace dppo::io {

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
  algo::DppoConfig config;
  algo::Algorithm algorithm = algo::Algorithm::dppo;
  std::string env_name;
  algo::Agent agent;
  int iteration = 0;
  std::int64_t env_steps = 0;
};

nlohmann::json to_json(const Checkpoint& ckpt);
/// Throws std::invalid_argument on a schema-version mismatch or a malformed
/// document.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Canonical text form; save -> load -> save reproduces it byte for byte.
std::string serialize(const Checkpoint& ckpt);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Reads and parses a JSON file; failures name the path.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes `text` to `path` through a temporary file and a rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dppo::io

#include "dppo/io/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dppo::io {

using nlohmann::json;

namespace {

json layer_to_json(const net::DenseLayer<double>& layer) {
  std::vector<double> weight;
  weight.reserve(static_cast<std::size_t>(layer.weight.size()));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) weight.push_back(layer.weight(r, c));
  }
  return json{{"rows", layer.weight.rows()},
              {"cols", layer.weight.cols()},
              {"activation", std::string(net::to_string(layer.activation))},
              {"weight", weight},
              {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}};
}

net::DenseLayer<double> layer_from_json(const json& j) {
  net::DenseLayer<double> layer;
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto weight = j.at("weight").get<std::vector<double>>();
  const auto bias = j.at("bias").get<std::vector<double>>();
  if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(weight.size()) != rows * cols ||
      static_cast<Eigen::Index>(bias.size()) != rows) {
    throw std::invalid_argument("checkpoint: layer shape does not match its values");
  }
  layer.weight.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = weight[static_cast<std::size_t>(r * cols + c)];
  }
  layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
  layer.activation = net::activation_from_string(j.at("activation").get<std::string>());
  return layer;
}

json mlp_to_json(const net::Mlp<double>& mlp) {
  json layers = json::array();
  for (const auto& l : mlp.layers()) layers.push_back(layer_to_json(l));
  return layers;
}

net::Mlp<double> mlp_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("checkpoint: layers must be an array");
  std::vector<net::DenseLayer<double>> layers;
  for (const auto& l : j) layers.push_back(layer_from_json(l));
  net::Mlp<double> mlp(std::move(layers));
  if (!mlp.all_finite()) throw std::invalid_argument("checkpoint: non-finite parameter");
  return mlp;
}

}  // namespace

json to_json(const Checkpoint& ckpt) {
  json cfg;
  algo::to_json(cfg, ckpt.config);
  const auto& log_std = ckpt.agent.head.log_std;
  return json{
      {"schema_version", kCheckpointSchemaVersion},
      {"algo", std::string(algo::to_string(ckpt.algorithm))},
      {"env", ckpt.env_name},
      {"config", cfg},
      {"actor", {{"layers", mlp_to_json(ckpt.agent.actor)},
                 {"log_std", std::vector<double>(log_std.data(), log_std.data() + log_std.size())}}},
      {"critic", {{"layers", mlp_to_json(ckpt.agent.critic)}, {"risk_input", ckpt.agent.critic_risk_input}}},
      {"rng", {{"engine", "mt19937_64"}, {"seed", ckpt.config.seed}, {"iteration", ckpt.iteration},
               {"env_steps", ckpt.env_steps}}},
  };
}

Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw std::invalid_argument("checkpoint: missing schema_version");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kCheckpointSchemaVersion) {
    throw std::invalid_argument("checkpoint: schema version " + std::to_string(version) + " is not supported (expected " +
                                std::to_string(kCheckpointSchemaVersion) + ")");
  }
  try {
    Checkpoint ckpt;
    ckpt.algorithm = algo::algorithm_from_string(j.at("algo").get<std::string>());
    ckpt.env_name = j.at("env").get<std::string>();
    algo::from_json(j.at("config"), ckpt.config);
    ckpt.agent.actor = mlp_from_json(j.at("actor").at("layers"));
    const auto log_std = j.at("actor").at("log_std").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(log_std.size()) != ckpt.agent.actor.outputs()) {
      throw std::invalid_argument("checkpoint: log_std length differs from the action dimension");
    }
    ckpt.agent.head.log_std = Eigen::Map<const Eigen::VectorXd>(log_std.data(), ckpt.agent.actor.outputs());
    ckpt.agent.critic = mlp_from_json(j.at("critic").at("layers"));
    ckpt.agent.critic_risk_input = j.at("critic").at("risk_input").get<bool>();
    ckpt.agent.value_scale = ckpt.config.value_scale;
    ckpt.agent.conditioning = {ckpt.algorithm, ckpt.config.metric};
    ckpt.iteration = j.at("rng").at("iteration").get<int>();
    ckpt.env_steps = j.at("rng").at("env_steps").get<std::int64_t>();
    if (ckpt.agent.critic.inputs() != ckpt.agent.actor.inputs()) {
      throw std::invalid_argument("checkpoint: actor and critic input widths differ");
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }
}

std::string serialize(const Checkpoint& ckpt) { return to_json(ckpt).dump(1) + "\n"; }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out.flush()) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) { write_text_file(path, serialize(ckpt)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(read_json_file(path));
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.find(path.string()) != std::string::npos) throw;
    throw std::invalid_argument("'" + path.string() + "': " + what);
  }
}

}  // namespace dppo::io

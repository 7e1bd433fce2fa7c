#include "dppo/algo/config.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace dppo::algo {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::dppo: return "dppo";
    case Algorithm::ppo: return "ppo";
    case Algorithm::ppo1: return "ppo1";
    case Algorithm::ppo2: return "ppo2";
  }
  return "dppo";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "dppo") return Algorithm::dppo;
  if (name == "ppo") return Algorithm::ppo;
  if (name == "ppo1") return Algorithm::ppo1;
  if (name == "ppo2") return Algorithm::ppo2;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "' (expected dppo, ppo, ppo1 or ppo2)");
}

std::string_view to_string(CriticLoss l) { return l == CriticLoss::energy ? "energy" : "quantile_huber"; }

CriticLoss critic_loss_from_string(std::string_view name) {
  if (name == "energy") return CriticLoss::energy;
  if (name == "quantile_huber") return CriticLoss::quantile_huber;
  throw std::invalid_argument("unknown critic loss '" + std::string(name) + "' (expected energy or quantile_huber)");
}

namespace {

BetaRange default_range(Algorithm algo, RiskKind metric) {
  switch (algo) {
    case Algorithm::dppo: return training_range(metric);
    case Algorithm::ppo1: return {0.0, 2.0, false};
    case Algorithm::ppo2: return {-0.25, 0.25, false};
    case Algorithm::ppo: break;
  }
  return {0.0, 0.0, false};
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("config: " + message);
}

}  // namespace

BetaRange resolved_beta_range(const DppoConfig& cfg, Algorithm algo) {
  BetaRange range = default_range(algo, cfg.metric);
  if (algo == Algorithm::ppo || (algo == Algorithm::dppo && cfg.metric == RiskKind::neutral)) return range;
  if (cfg.beta_min) {
    range.low = *cfg.beta_min;
    range.open_low = false;
  }
  if (cfg.beta_max) range.high = *cfg.beta_max;
  // CVaR excludes zero; a user-supplied lower bound of 0 keeps it excluded.
  if (algo == Algorithm::dppo && cfg.metric == RiskKind::cvar && range.low == 0.0) range.open_low = true;
  return range;
}

void DppoConfig::validate(Algorithm algo) const {
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(lambda_gae >= 0.0 && lambda_gae <= 1.0, "lambda_gae must lie in [0, 1]");
  require(sr_lambda >= 0.0 && sr_lambda <= 1.0, "sr_lambda must lie in [0, 1]");
  require(clip_epsilon > 0.0, "clip_epsilon must be > 0");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(epochs >= 1, "epochs must be >= 1");
  require(minibatches >= 1, "minibatches must be >= 1");
  require(num_envs >= 1, "num_envs must be >= 1");
  require(horizon >= 1, "horizon must be >= 1");
  require(num_envs * horizon >= minibatches, "num_envs * horizon must be >= minibatches");
  require(num_atoms >= 1, "num_atoms must be >= 1");
  require(iterations >= 0, "iterations must be >= 0");
  require(entropy_coef >= 0.0, "entropy_coef must be >= 0");
  require(huber_kappa > 0.0, "huber_kappa must be > 0");
  require(!hidden_sizes.empty(), "hidden_sizes must not be empty");
  for (int h : hidden_sizes) require(h >= 1, "hidden_sizes entries must be >= 1");
  require(max_grad_norm > 0.0, "max_grad_norm must be > 0");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(std::isfinite(value_scale) && value_scale > 0.0, "value_scale must be finite and > 0");

  const BetaRange range = resolved_beta_range(*this, algo);
  require(std::isfinite(range.low) && std::isfinite(range.high), "beta range must be finite");
  require(range.low <= range.high, "beta_min must not exceed beta_max");
  if (algo == Algorithm::dppo && metric == RiskKind::cvar) {
    require(range.low >= 0.0 && range.high <= 1.0 && range.high > 0.0,
            "CVaR beta range must lie within (0, 1]");
  }
}

double RiskConditioning::feature(double beta) const {
  switch (algo) {
    case Algorithm::dppo:
      if (metric == RiskKind::cvar) return 2.0 * beta - 1.0;
      if (metric == RiskKind::wang) return beta;
      return 0.0;
    case Algorithm::ppo1: return beta - 1.0;
    case Algorithm::ppo2: return 4.0 * beta;
    case Algorithm::ppo: break;
  }
  return 0.0;
}

void to_json(nlohmann::json& j, const DppoConfig& c) {
  j = nlohmann::json{
      {"gamma", c.gamma},
      {"lambda_gae", c.lambda_gae},
      {"sr_lambda", c.sr_lambda},
      {"clip_epsilon", c.clip_epsilon},
      {"learning_rate", c.learning_rate},
      {"epochs", c.epochs},
      {"minibatches", c.minibatches},
      {"num_envs", c.num_envs},
      {"horizon", c.horizon},
      {"num_atoms", c.num_atoms},
      {"metric", std::string(to_string(c.metric))},
      {"beta_min", c.beta_min ? nlohmann::json(*c.beta_min) : nlohmann::json(nullptr)},
      {"beta_max", c.beta_max ? nlohmann::json(*c.beta_max) : nlohmann::json(nullptr)},
      {"iterations", c.iterations},
      {"seed", c.seed},
      {"entropy_coef", c.entropy_coef},
      {"critic_loss", std::string(to_string(c.critic_loss))},
      {"huber_kappa", c.huber_kappa},
      {"hidden_sizes", c.hidden_sizes},
      {"max_grad_norm", c.max_grad_norm},
      {"normalize_advantages", c.normalize_advantages},
      {"critic_risk_input", c.critic_risk_input},
      {"checkpoint_every", c.checkpoint_every},
      {"value_scale", c.value_scale},
  };
}

void from_json(const nlohmann::json& j, DppoConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  static const std::set<std::string> known = {
      "gamma", "lambda_gae", "sr_lambda", "clip_epsilon", "learning_rate", "epochs", "minibatches",
      "num_envs", "horizon", "num_atoms", "metric", "beta_min", "beta_max", "iterations", "seed",
      "entropy_coef", "critic_loss", "huber_kappa", "hidden_sizes", "max_grad_norm",
      "normalize_advantages", "critic_risk_input", "checkpoint_every", "value_scale"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw std::invalid_argument(std::string("config: '") + key + "' must be a number");
    out = j[key].get<double>();
  };
  auto integer = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) throw std::invalid_argument(std::string("config: '") + key + "' must be an integer");
    out = j[key].get<std::decay_t<decltype(out)>>();
  };
  auto boolean = [&](const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) throw std::invalid_argument(std::string("config: '") + key + "' must be a boolean");
    out = j[key].get<bool>();
  };
  auto optional_number = [&](const char* key, std::optional<double>& out) {
    if (!j.contains(key)) return;
    if (j[key].is_null()) {
      out.reset();
      return;
    }
    if (!j[key].is_number()) throw std::invalid_argument(std::string("config: '") + key + "' must be a number or null");
    out = j[key].get<double>();
  };
  auto text = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_string()) throw std::invalid_argument(std::string("config: '") + key + "' must be a string");
    return j[key].get<std::string>();
  };

  number("gamma", c.gamma);
  number("lambda_gae", c.lambda_gae);
  number("sr_lambda", c.sr_lambda);
  number("clip_epsilon", c.clip_epsilon);
  number("learning_rate", c.learning_rate);
  integer("epochs", c.epochs);
  integer("minibatches", c.minibatches);
  integer("num_envs", c.num_envs);
  integer("horizon", c.horizon);
  integer("num_atoms", c.num_atoms);
  if (auto m = text("metric")) c.metric = risk_kind_from_string(*m);
  optional_number("beta_min", c.beta_min);
  optional_number("beta_max", c.beta_max);
  integer("iterations", c.iterations);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
      throw std::invalid_argument("config: 'seed' must be a non-negative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  number("entropy_coef", c.entropy_coef);
  if (auto l = text("critic_loss")) c.critic_loss = critic_loss_from_string(*l);
  number("huber_kappa", c.huber_kappa);
  if (j.contains("hidden_sizes")) {
    const auto& h = j["hidden_sizes"];
    if (!h.is_array()) throw std::invalid_argument("config: 'hidden_sizes' must be an array of integers");
    c.hidden_sizes.clear();
    for (const auto& v : h) {
      if (!v.is_number_integer()) throw std::invalid_argument("config: 'hidden_sizes' must be an array of integers");
      c.hidden_sizes.push_back(v.get<int>());
    }
  }
  number("max_grad_norm", c.max_grad_norm);
  boolean("normalize_advantages", c.normalize_advantages);
  boolean("critic_risk_input", c.critic_risk_input);
  integer("checkpoint_every", c.checkpoint_every);
  number("value_scale", c.value_scale);
}

}  // namespace dppo::algo

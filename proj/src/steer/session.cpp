#include "dppo/steer/session.hpp"

#include "dppo/core/distribution.hpp"
#include "dppo/envs/environment.hpp"

#include <cmath>

#ifndef DPPO_VERSION
#define DPPO_VERSION "unknown"
#endif

namespace dppo::steer {

using nlohmann::json;

BetaRange steering_bounds(const algo::RiskConditioning& c) {
  switch (c.algo) {
    case algo::Algorithm::dppo: return evaluation_bounds(c.metric);
    case algo::Algorithm::ppo1: return {0.0, 2.0};
    case algo::Algorithm::ppo2: return {-0.25, 0.25};
    case algo::Algorithm::ppo: break;
  }
  return {0.0, 0.0};
}

Session::Session(io::Checkpoint checkpoint, std::string env_name, std::uint64_t seed, double auto_reset_seconds)
    : checkpoint_(std::move(checkpoint)),
      env_name_(std::move(env_name)),
      seed_(seed),
      auto_reset_seconds_(auto_reset_seconds),
      bounds_(steering_bounds(checkpoint_.agent.conditioning)) {
  env_ = envs::make_environment(env_name_, seed_);
  if (env_->observation_dim() != checkpoint_.agent.actor.inputs() ||
      env_->action_dim() != checkpoint_.agent.actor.outputs()) {
    throw std::invalid_argument("checkpoint does not fit environment '" + env_name_ + "'");
  }
  beta_ = bounds_.clamp(checkpoint_.agent.conditioning.metric == RiskKind::cvar ? 1.0 : 0.0);
  start_episode("initial");
}

json Session::hello() const {
  std::lock_guard lock(mutex_);
  return json{{"type", "hello"},
              {"protocol", kProtocolVersion},
              {"version", DPPO_VERSION},
              {"algo", std::string(algo::to_string(checkpoint_.algorithm))},
              {"metric", std::string(to_string(checkpoint_.agent.conditioning.metric_at(beta_).kind))},
              {"beta_bounds", {bounds_.low, bounds_.high}},
              {"beta_open_low", bounds_.open_low},
              {"beta", mailbox_.beta.value_or(beta_)},
              {"env", mailbox_.env.value_or(env_name_)},
              {"envs", envs::environment_names()},
              {"num_atoms", checkpoint_.agent.critic_width()},
              {"paused", mailbox_.paused}};
}

json Session::error(const std::string& message) const { return json{{"type", "error"}, {"message", message}}; }

json Session::handle_client_text(const std::string& text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    return error(std::string("malformed JSON: ") + e.what());
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    return error("message must be an object with a string 'type'");
  }
  const std::string type = msg["type"].get<std::string>();
  std::lock_guard lock(mutex_);
  if (type == "set_risk") {
    if (!msg.contains("beta") || !msg["beta"].is_number()) return error("set_risk needs a numeric 'beta'");
    const double requested = msg["beta"].get<double>();
    if (!std::isfinite(requested)) return error("set_risk beta must be finite");
    const double applied = bounds_.clamp(requested);
    mailbox_.beta = applied;
    return json{{"type", "ack"}, {"request", type}, {"beta", applied}, {"requested", requested},
                {"clamped", applied != requested}};
  }
  if (type == "reset") {
    mailbox_.reset = true;
    return json{{"type", "ack"}, {"request", type}};
  }
  if (type == "pause" || type == "resume") {
    mailbox_.paused = type == "pause";
    return json{{"type", "ack"}, {"request", type}, {"paused", mailbox_.paused}};
  }
  if (type == "set_env") {
    if (!msg.contains("name") || !msg["name"].is_string()) return error("set_env needs a string 'name'");
    const std::string name = msg["name"].get<std::string>();
    try {
      const auto probe = envs::make_environment(name);
      if (probe->observation_dim() != checkpoint_.agent.actor.inputs() ||
          probe->action_dim() != checkpoint_.agent.actor.outputs()) {
        return error("checkpoint does not fit environment '" + name + "'");
      }
    } catch (const std::invalid_argument& e) {
      return error(e.what());
    }
    mailbox_.env = name;
    return json{{"type", "ack"}, {"request", type}, {"name", name}};
  }
  if (type == "hello") return json{{"type", "ack"}, {"request", type}, {"protocol", kProtocolVersion}};
  return error("unknown message type '" + type + "'");
}

bool Session::paused() const {
  std::lock_guard lock(mutex_);
  return mailbox_.paused;
}

std::optional<std::string> Session::fatal_error() const { return fatal_; }

void Session::start_episode(const char* reason) {
  env_->set_risk_feature(checkpoint_.agent.conditioning.feature(beta_));
  observation_ = env_->reset(seed_ + episode_);
  ++episode_;
  cum_return_ = 0.0;
  done_info_.reset();
  done_at_.reset();
  reset_reason_ = reason;
}

json Session::state_message(double reward) {
  const algo::Agent& agent = checkpoint_.agent;
  const RiskMetric metric = agent.conditioning.metric_at(beta_);
  const Eigen::VectorXd atoms = agent.critic_outputs(observation_).col(0);
  const Eigen::VectorXd weights = distortion_weights(metric, atoms.size());
  const Eigen::VectorXd position = env_->position();
  json out{{"type", "state"},
           {"tick", tick_},
           {"env", env_name_},
           {"episode", episode_},
           {"position", std::vector<double>(position.data(), position.data() + position.size())},
           {"reward", reward},
           {"cum_return", cum_return_},
           {"beta", beta_},
           {"metric", std::string(to_string(metric.kind))},
           {"done_info", done_info_ ? json(*done_info_) : json(nullptr)},
           {"atoms", std::vector<double>(atoms.data(), atoms.data() + atoms.size())},
           {"distorted_value", distorted_value(atoms, metric)},
           {"weights", std::vector<double>(weights.data(), weights.data() + weights.size())},
           {"reset", reset_reason_ ? json(reset_reason_) : json(nullptr)}};
  reset_reason_ = nullptr;
  return out;
}

std::optional<json> Session::tick(double now) {
  if (fatal_) {
    if (fatal_reported_) return std::nullopt;
    fatal_reported_ = true;
    return json{{"type", "error"}, {"fatal", true}, {"message", *fatal_}};
  }
  Mailbox pending;
  {
    std::lock_guard lock(mutex_);
    pending = mailbox_;
    mailbox_.beta.reset();
    mailbox_.reset = false;
    mailbox_.env.reset();
  }
  if (pending.beta) beta_ = *pending.beta;
  if (pending.env) {
    env_name_ = *pending.env;
    env_ = envs::make_environment(env_name_, seed_);
    start_episode("env");
  } else if (pending.reset) {
    start_episode("manual");
  }
  if (pending.paused) return std::nullopt;

  ++tick_;
  double reward = 0.0;
  if (done_info_) {
    if (done_at_ && now - *done_at_ >= auto_reset_seconds_) start_episode("auto");
    return state_message(0.0);
  }
  try {
    env_->set_risk_feature(checkpoint_.agent.conditioning.feature(beta_));
    observation_ = env_->observation();
    const Eigen::VectorXd action = checkpoint_.agent.action_means(observation_).col(0);
    const envs::StepResult step = env_->step(action);
    observation_ = step.observation;
    reward = step.reward;
    cum_return_ += reward;
    if (step.done()) {
      done_info_ = step.event == envs::Event::none ? std::string("timeout") : std::string(envs::to_string(step.event));
      done_at_ = now;
    }
  } catch (const std::exception& e) {
    fatal_ = std::string("environment fault: ") + e.what();
    fatal_reported_ = true;
    return json{{"type", "error"}, {"fatal", true}, {"message", *fatal_}};
  }
  return state_message(reward);
}

}  // namespace dppo::steer

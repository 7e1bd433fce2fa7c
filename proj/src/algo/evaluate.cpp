#include "dppo/algo/evaluate.hpp"

#include "dppo/envs/gap_step.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dppo::algo {

Interval mean_interval(const std::vector<double>& samples) {
  Interval out;
  if (samples.empty()) return out;
  const auto n = static_cast<double>(samples.size());
  for (double s : samples) out.mean += s;
  out.mean /= n;
  if (samples.size() < 2) return out;
  double ss = 0.0;
  for (double s : samples) ss += (s - out.mean) * (s - out.mean);
  out.ci95 = 1.96 * std::sqrt(ss / (n - 1.0) / n);
  return out;
}

std::vector<double> beta_grid(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("beta grid needs at least one point");
  if (!(lo <= hi)) throw std::invalid_argument("beta grid needs lo <= hi");
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return grid;
}

std::vector<double> parse_beta_grid(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (b == std::string::npos) throw std::invalid_argument("beta grid '" + text + "' is not lo:hi:n");
  try {
    std::size_t used = 0;
    const double lo = std::stod(text.substr(0, a));
    const double hi = std::stod(text.substr(a + 1, b - a - 1));
    const std::string count = text.substr(b + 1);
    const int n = std::stoi(count, &used);
    if (used != count.size()) throw std::invalid_argument("trailing characters");
    return beta_grid(lo, hi, n);
  } catch (const std::logic_error& e) {
    throw std::invalid_argument("beta grid '" + text + "' is not lo:hi:n (" + e.what() + ")");
  }
}

std::unique_ptr<envs::Environment> make_eval_environment(const std::string& env_name, std::uint64_t seed,
                                                         std::optional<double> height) {
  if (!height) return envs::make_environment(env_name, seed);
  if (env_name != "gap-step") throw std::invalid_argument("--height only applies to gap-step");
  return std::make_unique<envs::GapStep>(seed, height);
}

EpisodeOutcome run_episode(const Agent& agent, envs::Environment& env, double beta, std::uint64_t seed) {
  env.set_risk_feature(agent.conditioning.feature(beta));
  EpisodeOutcome out;
  Eigen::VectorXd obs = env.reset(seed);
  out.trajectory.positions.push_back(env.position());
  for (;;) {
    const Eigen::VectorXd action = agent.actor.forward_one(obs);
    const envs::StepResult step = env.step(action);
    out.episode_return += step.reward;
    ++out.steps;
    out.trajectory.positions.push_back(env.position());
    out.trajectory.events.push_back(step.event);
    obs = step.observation;
    if (step.done()) {
      out.early_termination = step.event == envs::Event::fell || step.event == envs::Event::failed;
      break;
    }
  }
  out.trajectory.complete = true;
  out.progress = env.progress();
  return out;
}

std::vector<EvalRow> evaluate(const Agent& agent, const std::string& env_name, const EvalOptions& options) {
  if (options.episodes < 1) throw std::invalid_argument("evaluation needs at least one episode per beta");
  if (options.betas.empty()) throw std::invalid_argument("evaluation needs a non-empty beta grid");
  const bool gap = env_name == "gap-step";
  std::vector<EvalRow> rows;
  std::mt19937_64 seeds(options.seed);
  for (double beta : options.betas) {
    if (agent.distributional()) agent.conditioning.metric_at(beta).validate();
    auto env = make_eval_environment(env_name, seeds(), options.height);
    std::vector<double> returns, early, tracking;
    int risky = 0, refusal = 0, failure = 0, success = 0;
    for (int e = 0; e < options.episodes; ++e) {
      const EpisodeOutcome ep = run_episode(agent, *env, beta, seeds());
      returns.push_back(ep.episode_return);
      early.push_back(ep.early_termination ? 1.0 : 0.0);
      const double realised = ep.progress / static_cast<double>(ep.steps);
      tracking.push_back(std::max(0.0, env->commanded_rate() - realised));
      switch (envs::classify_path(env_name, ep.trajectory)) {
        case envs::PathClass::risky: ++risky; break;
        case envs::PathClass::refusal: ++refusal; break;
        case envs::PathClass::failure: ++failure; break;
        case envs::PathClass::success: ++success; break;
        case envs::PathClass::safe: break;
      }
    }
    EvalRow row;
    row.beta = beta;
    row.episodes = options.episodes;
    row.episode_return = mean_interval(returns);
    row.early_termination = mean_interval(early);
    row.tracking_error = mean_interval(tracking);
    const double n = options.episodes;
    if (gap) {
      row.refusal_rate = refusal / n;
      row.failure_rate = failure / n;
      row.success_rate = success / n;
      row.height = options.height;
    } else {
      row.risky_fraction = risky / n;
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

void put_interval(nlohmann::json& j, const char* key, const Interval& v) {
  j[key] = v.mean;
  j[std::string(key) + "_ci95"] = v.ci95;
}

Interval get_interval(const nlohmann::json& j, const char* key) {
  return {j.at(key).get<double>(), j.at(std::string(key) + "_ci95").get<double>()};
}

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

std::optional<double> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const EvalRow& row) {
  j = nlohmann::json::object();
  j["beta"] = row.beta;
  j["episodes"] = row.episodes;
  put_interval(j, "mean_return", row.episode_return);
  put_interval(j, "early_termination", row.early_termination);
  put_interval(j, "tracking_error", row.tracking_error);
  put_optional(j, "risky_fraction", row.risky_fraction);
  put_optional(j, "refusal_rate", row.refusal_rate);
  put_optional(j, "failure_rate", row.failure_rate);
  put_optional(j, "success_rate", row.success_rate);
  put_optional(j, "height", row.height);
}

void from_json(const nlohmann::json& j, EvalRow& row) {
  if (!j.is_object()) throw std::invalid_argument("evaluation row is not an object");
  row.beta = j.at("beta").get<double>();
  row.episodes = j.at("episodes").get<int>();
  row.episode_return = get_interval(j, "mean_return");
  row.early_termination = get_interval(j, "early_termination");
  row.tracking_error = get_interval(j, "tracking_error");
  row.risky_fraction = get_optional(j, "risky_fraction");
  row.refusal_rate = get_optional(j, "refusal_rate");
  row.failure_rate = get_optional(j, "failure_rate");
  row.success_rate = get_optional(j, "success_rate");
  row.height = get_optional(j, "height");
}

}  // namespace dppo::algo

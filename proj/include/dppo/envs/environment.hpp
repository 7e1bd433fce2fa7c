#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dppo::envs {

using Observation = Eigen::VectorXd;
using Action = Eigen::VectorXd;

/// What happened on a step, beyond the reward.
enum class Event { none, fell, failed, crossed, succeeded, refused };

std::string_view to_string(Event e);

struct RewardTerm {
  std::string_view name;
  double value;
};
using RewardTerms = std::vector<RewardTerm>;

struct StepResult {
  Observation observation;
  double reward = 0.0;
  RewardTerms terms;
  bool terminated = false;
  bool truncated = false;
  Event event = Event::none;

  bool done() const { return terminated || truncated; }
};

/// Source of the single Bernoulli draw an environment may make per step.
/// The oracle substitutes a forced outcome to enumerate both branches.
class Chance {
 public:
  virtual ~Chance() = default;
  virtual bool bernoulli(double p) = 0;
};

class RngChance final : public Chance {
 public:
  explicit RngChance(std::mt19937_64& rng) : rng_(rng) {}
  bool bernoulli(double p) override { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

 private:
  std::mt19937_64& rng_;
};

class ForcedChance final : public Chance {
 public:
  explicit ForcedChance(bool outcome) : outcome_(outcome) {}
  bool bernoulli(double p) override {
    queried_ = p;
    return outcome_;
  }
  std::optional<double> queried() const { return queried_; }

 private:
  bool outcome_;
  std::optional<double> queried_;
};

/// Toy episodic environment. Observations end with the risk-parameter feature,
/// which the environment carries but never reads.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view name() const = 0;
  virtual Eigen::Index observation_dim() const = 0;
  virtual Eigen::Index action_dim() const = 0;
  virtual int max_steps() const = 0;
  /// Progress per step the operator asks for; the tracking metric measures
  /// shortfall against it.
  virtual double commanded_rate() const = 0;

  /// Starts an episode. A seed reseeds the environment's own stream first.
  virtual Observation reset(std::optional<std::uint64_t> seed = std::nullopt) = 0;
  virtual StepResult step(const Action& action, Chance& chance) = 0;
  StepResult step(const Action& action) {
    RngChance chance(rng_);
    return step(action, chance);
  }

  virtual Observation observation() const = 0;
  /// World position for display and trajectory records.
  virtual Eigen::VectorXd position() const = 0;
  /// Signed distance travelled along the task axis since reset.
  virtual double progress() const = 0;
  virtual int elapsed_steps() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;

  /// Equally likely (or weighted) start states; used for exact enumeration.
  virtual std::vector<std::pair<double, std::unique_ptr<Environment>>> reset_branches() const;

  void set_risk_feature(double feature) { risk_feature_ = feature; }
  double risk_feature() const { return risk_feature_; }

  /// Components clamped into [-1, 1] since construction.
  std::uint64_t clamped_actions() const { return clamped_actions_; }

 protected:
  double clamp_action(double a);

  std::mt19937_64 rng_{0};
  double risk_feature_ = 0.0;
  std::uint64_t clamped_actions_ = 0;
};

/// "risky-cliff", "risky-cliff-deterministic" or "gap-step".
std::unique_ptr<Environment> make_environment(std::string_view name, std::uint64_t seed = 0);
std::vector<std::string> environment_names();

}  // namespace dppo::envs

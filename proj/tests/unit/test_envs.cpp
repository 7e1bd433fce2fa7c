#include "dppo/core/distribution.hpp"
#include "dppo/envs/gap_step.hpp"
#include "dppo/envs/oracle.hpp"
#include "dppo/envs/risky_cliff.hpp"
#include "dppo/envs/trajectory.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace dppo;
using namespace dppo::envs;

namespace {

Eigen::VectorXd act2(double x, double y) { return Eigen::Vector2d(x, y); }
Eigen::VectorXd act1(double x) { return Eigen::VectorXd::Constant(1, x); }

double run(Environment& env, const PolicyFn& policy, Trajectory* trajectory = nullptr) {
  Observation obs = env.reset();
  double total = 0.0;
  if (trajectory) trajectory->positions.push_back(env.position());
  for (;;) {
    const StepResult r = env.step(policy.act(obs));
    total += r.reward;
    obs = r.observation;
    if (trajectory) {
      trajectory->positions.push_back(env.position());
      trajectory->events.push_back(r.event);
    }
    if (r.done()) break;
  }
  if (trajectory) trajectory->complete = true;
  return total;
}

}  // namespace

TEST_SUITE("envs") {
  TEST_CASE("cliff reset is fixed") {
    RiskyCliff env(0.02, 99);
    env.set_risk_feature(0.7);
    for (int k = 0; k < 3; ++k) {
      const Observation o = env.reset(static_cast<std::uint64_t>(k));
      CHECK(o(0) == 0.0);
      CHECK(o(1) == 0.5);
      CHECK(o(2) == 0.7);
      CHECK(env.position() == Eigen::Vector2d(0.0, 2.0));
    }
  }

  TEST_CASE("cliff step arithmetic") {
    RiskyCliff env(0.02, 0);
    env.reset();
    const StepResult r = env.step(act2(1.0, 0.0));
    CHECK(env.position() == Eigen::Vector2d(1.0, 2.0));
    CHECK(r.reward == doctest::Approx(0.5));
    CHECK_FALSE(r.done());
    CHECK(r.reward >= -12.5);
    CHECK(r.reward <= 11.5);
  }

  TEST_CASE("cliff clamps actions and positions") {
    RiskyCliff env(0.0, 0);
    env.reset();
    env.step(act2(-3.0, 5.0));
    CHECK(env.position() == Eigen::Vector2d(0.0, 3.0));
    CHECK(env.clamped_actions() == 2);
    env.step(act2(0.0, 1.0));
    CHECK(env.position()(1) == 4.0);
    CHECK_THROWS_AS(env.step(Eigen::VectorXd::Zero(1)), std::invalid_argument);
  }

  TEST_CASE("safe straight line returns 15") {
    RiskyCliff env(0.02, 0);
    Trajectory traj;
    CHECK(run(env, scripted_policy("safe"), &traj) == doctest::Approx(15.0));
    CHECK(classify_cliff_path(traj) == PathClass::safe);
    CHECK(traj.events.back() == Event::succeeded);
  }

  TEST_CASE("cliff truncates at the step limit") {
    RiskyCliff env(0.0, 0);
    env.reset();
    StepResult r;
    for (int t = 0; t < RiskyCliff::kMaxSteps; ++t) r = env.step(act2(0.0, 0.0));
    CHECK(r.truncated);
    CHECK_FALSE(r.terminated);
    CHECK_THROWS_AS(env.step(act2(0.0, 0.0)), std::logic_error);
  }

  TEST_CASE("hazard outcomes are reproducible per seed") {
    const auto falls = [](std::uint64_t seed) {
      RiskyCliff env(0.3, seed);
      std::vector<int> out;
      for (int ep = 0; ep < 20; ++ep) {
        Trajectory t;
        run(env, scripted_policy("risky"), &t);
        out.push_back(t.events.back() == Event::fell);
      }
      return out;
    };
    CHECK(falls(5) == falls(5));
    CHECK(falls(5) != falls(6));
  }

  TEST_CASE("gap-step reset and heights") {
    GapStep env(3);
    std::set<double> seen;
    std::vector<double> first, second;
    for (int k = 0; k < 200; ++k) {
      const Observation o = env.reset();
      CHECK(o(0) == 0.0);
      CHECK(std::find(GapStep::kHeights.begin(), GapStep::kHeights.end(), o(1)) != GapStep::kHeights.end());
      seen.insert(o(1));
      first.push_back(o(1));
    }
    CHECK(seen.size() == 4);
    GapStep again(3);
    for (int k = 0; k < 200; ++k) second.push_back(again.reset()(1));
    CHECK(first == second);
  }

  TEST_CASE("gap-step success probability") {
    CHECK(GapStep::success_probability(0.2) == doctest::Approx(0.9));
    CHECK(GapStep::success_probability(0.5) == doctest::Approx(0.3));
    CHECK(GapStep::success_probability(0.0) == doctest::Approx(0.95));
    CHECK(GapStep::success_probability(1.0) == doctest::Approx(0.05));
  }

  TEST_CASE("gap-step never-advance refuses with 3.2") {
    GapStep env(0, 0.3);
    Trajectory t;
    CHECK(run(env, scripted_policy("refuse"), &t) == doctest::Approx(3.2));
    CHECK(t.events.back() == Event::refused);
    CHECK(classify_gap_outcome(t) == PathClass::refusal);
  }

  TEST_CASE("gap-step attempt branches") {
    GapStep env(0, 0.4);
    env.reset();
    for (int k = 0; k < 3; ++k) env.step(act1(1.0));
    ForcedChance fail(false);
    const StepResult f = GapStep(env).step(act1(1.0), fail);
    CHECK(fail.queried().value() == doctest::Approx(0.5));
    CHECK(f.terminated);
    CHECK(f.event == Event::failed);
    CHECK(f.reward == doctest::Approx(-8.0));
    GapStep copy = env;
    ForcedChance ok(true);
    const StepResult s = copy.step(act1(1.0), ok);
    CHECK(s.event == Event::crossed);
    CHECK(copy.position()(0) == doctest::Approx(2.2));
    // A second pass over x = 2 does not draw again.
    copy.step(act1(-1.0));
    ForcedChance never(false);
    copy.step(act1(1.0), never);
    CHECK_FALSE(never.queried().has_value());
  }

  TEST_CASE("path classification") {
    Trajectory straight;
    straight.positions = {Eigen::Vector2d(0, 2), Eigen::Vector2d(1, 2)};
    straight.events = {Event::none};
    straight.complete = true;
    CHECK(classify_path("risky-cliff", straight) == PathClass::safe);
    Trajectory fell = straight;
    fell.events = {Event::fell};
    CHECK(classify_path("risky-cliff", fell) == PathClass::risky);
    Trajectory goal;
    goal.positions = {Eigen::VectorXd::Constant(1, 0.0)};
    goal.events = {Event::crossed, Event::succeeded};
    goal.complete = true;
    CHECK(classify_path("gap-step", goal) == PathClass::success);
    goal.events = {Event::crossed, Event::none};
    CHECK(classify_path("gap-step", goal) == PathClass::failure);
    straight.complete = false;
    CHECK_THROWS_AS(classify_path("risky-cliff", straight), std::invalid_argument);
  }

  TEST_CASE("environment factory") {
    CHECK(make_environment("risky-cliff")->name() == "risky-cliff");
    CHECK(make_environment("risky-cliff-deterministic")->name() == "risky-cliff-deterministic");
    CHECK(make_environment("gap-step")->name() == "gap-step");
    CHECK_THROWS_AS(make_environment("lava"), std::invalid_argument);
  }
}

TEST_SUITE("oracle") {
  TEST_CASE("hazard-free policy gives one atom") {
    const RiskyCliff env(0.02, 0);
    const OracleResult r = oracle_return_distribution(env, scripted_policy("safe"), 0.0);
    REQUIRE(r.atoms.size() == 1);
    CHECK(r.atoms[0].value == doctest::Approx(15.0));
    CHECK(r.atoms[0].probability == 1.0);
    CHECK_FALSE(r.monte_carlo);
  }

  TEST_CASE("attempt at h = 0.4 gives two even atoms") {
    const GapStep env(0, 0.4);
    const OracleResult r = oracle_return_distribution(env, scripted_policy("attempt"), 0.0);
    REQUIRE(r.atoms.size() == 2);
    CHECK(r.atoms[0].probability == doctest::Approx(0.5));
    CHECK(r.atoms[1].probability == doctest::Approx(0.5));
    CHECK(r.atoms[0].value == doctest::Approx(-7.4));
    CHECK(r.atoms[1].value == doctest::Approx(9.6));
  }

  TEST_CASE("attempting at h = 0.5 is worse than refusing in expectation") {
    const GapStep env(0, 0.5);
    const double attempt = oracle_return_distribution(env, scripted_policy("attempt"), 0.0).expected();
    const double refuse = oracle_return_distribution(env, scripted_policy("refuse"), 0.0).expected();
    CHECK(attempt < refuse);
    CHECK(refuse == doctest::Approx(3.2));
  }

  TEST_CASE("hazard lane gives a geometric outcome tree") {
    const RiskyCliff env(0.02, 0);
    const OracleResult r = oracle_return_distribution(env, scripted_policy("risky"), 0.0);
    const std::size_t k = r.atoms.size() - 1;  // hazard steps
    CHECK(k >= 1);
    double total = 0.0;
    std::vector<double> fall_probabilities;
    for (const auto& a : r.atoms) {
      total += a.probability;
      if (a.value < 0.0) fall_probabilities.push_back(a.probability);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    REQUIRE(fall_probabilities.size() == k);
    std::sort(fall_probabilities.rbegin(), fall_probabilities.rend());
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(fall_probabilities[j] == doctest::Approx(std::pow(0.98, static_cast<double>(j)) * 0.02).epsilon(1e-12));
    }
    CHECK(r.atoms.back().value == doctest::Approx(16.5));
    CHECK(r.atoms.back().probability == doctest::Approx(std::pow(0.98, static_cast<double>(k))));
  }

  TEST_CASE("oracle mean matches Monte Carlo") {
    for (const char* name : {"risky", "safe"}) {
      const RiskyCliff env(0.02, 0);
      OracleOptions exact;
      const OracleResult r = oracle_return_distribution(env, scripted_policy(name), 0.0, exact);
      OracleOptions sampled;
      sampled.max_branches = 0;
      sampled.monte_carlo_episodes = 1'000'000;
      sampled.seed = 17;
      const OracleResult mc = oracle_return_distribution(env, scripted_policy(name), 0.0, sampled);
      CHECK(mc.monte_carlo);
      double second = 0.0;
      for (const auto& a : r.atoms) second += a.probability * a.value * a.value;
      const double sd = std::sqrt(std::max(0.0, second - r.expected() * r.expected()));
      const double se = sd / std::sqrt(1e6);
      CHECK(std::abs(mc.expected() - r.expected()) <= 3.0 * se + 1e-12);
    }
  }

  TEST_CASE("oracle over random gap heights") {
    const GapStep env(0);
    const OracleResult r = oracle_return_distribution(env, scripted_policy("attempt"), 0.0);
    double total = 0.0;
    for (const auto& a : r.atoms) total += a.probability;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    // Mean success probability over the four heights is (0.9 + 0.7 + 0.5 + 0.3) / 4.
    CHECK(r.expected() == doctest::Approx(0.6 * 9.6 + 0.4 * -7.4));
  }

  TEST_CASE("stochastic policies are rejected") {
    PolicyFn p = scripted_policy("safe");
    p.stochastic = true;
    CHECK_THROWS_AS(oracle_return_distribution(RiskyCliff(0.02, 0), p, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(scripted_policy("wander"), std::invalid_argument);
  }

  TEST_CASE("canonical cliff policies swap preference across beta") {
    const RiskyCliff env(0.02, 0);
    const auto safe = oracle_return_distribution(env, scripted_policy("safe"), 0.0).atoms;
    const auto risky = oracle_return_distribution(env, scripted_policy("risky"), 0.0).atoms;
    CHECK(distorted_value(safe, RiskMetric::wang(1.5)) > distorted_value(risky, RiskMetric::wang(1.5)));
    CHECK(distorted_value(safe, RiskMetric::wang(-1.5)) < distorted_value(risky, RiskMetric::wang(-1.5)));
  }

  TEST_CASE("discrete distorted value agrees with fine quantile atoms") {
    const RiskyCliff env(0.02, 0);
    const auto r = oracle_return_distribution(env, scripted_policy("risky"), 0.0);
    const auto fine = quantile_compress(r.atoms, 20000);
    for (double b : {-1.5, 0.0, 1.5}) {
      CHECK(distorted_value(r.atoms, RiskMetric::wang(b)) ==
            doctest::Approx(distorted_value(fine, RiskMetric::wang(b))).epsilon(1e-3));
    }
    CHECK(distorted_value(r.atoms, RiskMetric::neutral()) == doctest::Approx(r.expected()));
  }

  TEST_CASE("quantile compression picks midpoint quantiles") {
    const std::vector<ReturnAtom> atoms = {{-1.0, 0.25}, {2.0, 0.75}};
    const auto q = quantile_compress(atoms, 4).supports();
    CHECK(q(0) == -1.0);
    CHECK(q(1) == 2.0);
    CHECK(q(3) == 2.0);
    CHECK_THROWS_AS(quantile_compress({}, 4), std::invalid_argument);
  }
}

// dppo: train, evaluate, inspect and steer risk-conditioned policies.

#include "dppo/algo/evaluate.hpp"
#include "dppo/algo/trainer.hpp"
#include "dppo/envs/gap_step.hpp"
#include "dppo/envs/oracle.hpp"
#include "dppo/io/checkpoint.hpp"
#include "dppo/io/metrics.hpp"
#include "dppo/io/plot.hpp"
#include "dppo/steer/server.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef DPPO_VERSION
#define DPPO_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dppo;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

void write_output(const std::optional<std::string>& out, const std::string& text) {
  if (!out || *out == "-") {
    std::cout << text;
    return;
  }
  io::write_text_file(*out, text);
}

void require_compatible(const io::Checkpoint& ckpt, const std::string& env_name) {
  const auto env = envs::make_environment(env_name);
  if (env->observation_dim() != ckpt.agent.actor.inputs() || env->action_dim() != ckpt.agent.actor.outputs()) {
    throw std::invalid_argument("checkpoint trained on '" + ckpt.env_name + "' does not fit environment '" +
                                env_name + "'");
  }
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::optional<std::string> config;
  std::string env;
  std::string algo;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> metric;
  std::optional<int> iterations;
  bool deterministic_metrics = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  algo::DppoConfig cfg;
  if (a.config) algo::from_json(io::read_json_file(*a.config), cfg);
  if (a.seed) cfg.seed = *a.seed;
  if (a.metric) cfg.metric = risk_kind_from_string(*a.metric);
  if (a.iterations) cfg.iterations = *a.iterations;
  const algo::Algorithm algorithm = algo::algorithm_from_string(a.algo);
  envs::make_environment(a.env);  // validates the name
  cfg.validate(algorithm);
  const BetaRange range = algo::resolved_beta_range(cfg, algorithm);
  cfg.beta_min = range.low;
  cfg.beta_max = range.high;

  const fs::path out(a.out);
  fs::create_directories(out);
  json resolved;
  algo::to_json(resolved, cfg);
  io::write_text_file(out / "config.resolved.json", resolved.dump(2) + "\n");

  io::MetricsWriter metrics(out / "metrics.jsonl", a.deterministic_metrics);
  algo::TrainCallbacks callbacks;
  callbacks.on_metrics = [&](const algo::MetricsRecord& rec) {
    metrics.write(rec);
    if (!a.quiet && (rec.iteration % 50 == 0 || rec.iteration == cfg.iterations)) {
      std::cerr << "iteration " << rec.iteration << "/" << cfg.iterations << "  steps " << rec.env_steps
                << "  return " << (rec.mean_return ? std::to_string(*rec.mean_return) : std::string("n/a")) << '\n';
    }
  };
  callbacks.on_checkpoint = [&](const algo::Trainer& t) {
    io::Checkpoint ckpt{cfg, algorithm, a.env, t.agent(), t.iteration(), t.env_steps()};
    io::save_checkpoint(out / "checkpoint.json", ckpt);
    if (t.iteration() != cfg.iterations) {
      io::save_checkpoint(out / ("checkpoint_" + std::to_string(t.iteration()) + ".json"), ckpt);
    }
  };
  algo::train(cfg, a.env, algorithm, callbacks);
  return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string env;
  std::string beta_grid;
  int episodes = 0;
  std::uint64_t seed = 0;
  std::optional<double> height;
  std::optional<std::string> out;
};

int cmd_eval(const EvalArgs& a) {
  if (a.episodes < 1) throw std::invalid_argument("--episodes must be >= 1");
  const io::Checkpoint ckpt = io::load_checkpoint(a.ckpt);
  require_compatible(ckpt, a.env);
  algo::EvalOptions opts;
  opts.betas = algo::parse_beta_grid(a.beta_grid);
  opts.episodes = a.episodes;
  opts.seed = a.seed;
  opts.height = a.height;
  const auto rows = algo::evaluate(ckpt.agent, a.env, opts);
  write_output(a.out, io::eval_report_to_json(rows).dump(2) + "\n");
  return 0;
}

// ---- oracle --------------------------------------------------------------

struct OracleArgs {
  std::string env;
  std::string policy;
  double beta = 0.0;
  std::optional<double> height;
  bool stochastic = false;
  int atoms = 32;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

int cmd_oracle(const OracleArgs& a) {
  envs::PolicyFn policy;
  double feature = a.beta;
  std::optional<io::Checkpoint> ckpt;
  if (a.policy.rfind("scripted:", 0) == 0) {
    policy = envs::scripted_policy(a.policy.substr(9));
  } else if (a.policy.rfind("ckpt:", 0) == 0) {
    ckpt = io::load_checkpoint(a.policy.substr(5));
    require_compatible(*ckpt, a.env);
    feature = ckpt->agent.conditioning.feature(a.beta);
    const algo::Agent agent = ckpt->agent;
    policy.act = [agent](const envs::Observation& obs) -> envs::Action { return agent.actor.forward_one(obs); };
  } else {
    throw std::invalid_argument("--policy must be ckpt:<file> or scripted:<safe|risky|refuse|attempt>");
  }
  policy.stochastic = a.stochastic;

  const auto env = algo::make_eval_environment(a.env, a.seed, a.height);
  envs::OracleOptions opts;
  opts.num_atoms = a.atoms;
  opts.seed = a.seed;
  const envs::OracleResult res = envs::oracle_return_distribution(*env, policy, feature, opts);

  json atoms = json::array();
  for (const auto& at : res.atoms) atoms.push_back({{"return", at.value}, {"probability", at.probability}});
  json cvar = json::array(), wang = json::array();
  for (int i = 1; i <= 10; ++i) {
    const double b = i / 10.0;
    cvar.push_back({{"beta", b}, {"value", envs::distorted_value(res.atoms, RiskMetric::cvar(b))}});
  }
  for (int i = -6; i <= 6; ++i) {
    const double b = i / 2.0;
    wang.push_back({{"beta", b}, {"value", envs::distorted_value(res.atoms, RiskMetric::wang(b))}});
  }
  const auto& q = res.quantiles.supports();
  json doc{{"env", a.env},
           {"policy", a.policy},
           {"beta", a.beta},
           {"risk_feature", feature},
           {"monte_carlo", res.monte_carlo},
           {"branches", res.branches},
           {"expected", res.expected()},
           {"atoms", atoms},
           {"quantiles", std::vector<double>(q.data(), q.data() + q.size())},
           {"distorted", {{"neutral", envs::distorted_value(res.atoms, RiskMetric::neutral())},
                          {"cvar", cvar},
                          {"wang", wang}}}};
  if (a.height) doc["height"] = *a.height;
  write_output(a.out, doc.dump(2) + "\n");
  return 0;
}

// ---- plot ----------------------------------------------------------------

struct PlotArgs {
  std::vector<std::string> reports;
  std::string out;
};

int cmd_plot(const PlotArgs& a) {
  std::vector<io::PlotSeries> series;
  for (const auto& path : a.reports) {
    io::PlotSeries s;
    s.label = fs::path(path).stem().string();
    try {
      s.rows = io::eval_report_from_json(io::read_json_file(path));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("'" + path + "': " + e.what());
    }
    series.push_back(std::move(s));
  }
  for (const auto& p : io::write_plots(series, a.out)) std::cout << p.string() << '\n';
  return 0;
}

// ---- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string ckpt;
  std::string env;
  std::string host = "127.0.0.1";
  int port = 8080;
  double tick_hz = 10.0;
  std::optional<std::string> ui_dir;
  std::uint64_t seed = 0;
};

steer::Server* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const ServeArgs& a) {
  if (a.port < 0 || a.port > 65535) throw std::invalid_argument("--port must lie in [0, 65535]");
  if (!(a.tick_hz > 0.0) || a.tick_hz > 1000.0) throw std::invalid_argument("--tick-hz must lie in (0, 1000]");
  io::Checkpoint ckpt = io::load_checkpoint(a.ckpt);
  require_compatible(ckpt, a.env);
  steer::Session session(std::move(ckpt), a.env, a.seed);
  steer::ServerOptions opts;
  opts.host = a.host;
  opts.port = static_cast<std::uint16_t>(a.port);
  opts.tick_hz = a.tick_hz;
  if (a.ui_dir) opts.ui_dir = fs::path(*a.ui_dir);
  steer::Server server(session, opts);
  server.bind();
  std::cerr << "serving on http://" << a.host << ":" << server.port() << "/ (websocket /ws)" << std::endl;
  g_server = &server;
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  const auto failure = server.run();
  g_server = nullptr;
  if (failure) throw std::runtime_error(*failure);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributional PPO lab: risk-conditioned policies on toy environments"};
  app.set_version_flag("--version", std::string("dppo ") + DPPO_VERSION);
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a policy and write metrics and checkpoints");
  t->add_option("--config", train.config, "JSON file mirroring the training configuration");
  t->add_option("--env", train.env, "Environment name")->required();
  t->add_option("--algo", train.algo, "dppo | ppo | ppo1 | ppo2")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--seed", train.seed, "Seed (overrides the config)");
  t->add_option("--metric", train.metric, "neutral | cvar | wang (overrides the config)");
  t->add_option("--iterations", train.iterations, "Iterations (overrides the config)");
  t->add_flag("--deterministic-metrics", train.deterministic_metrics, "Write wall_seconds as 0");
  t->add_flag("--quiet", train.quiet, "No progress output");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint over a grid of risk parameters");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint file")->required();
  e->add_option("--env", eval.env, "Environment name")->required();
  e->add_option("--beta-grid", eval.beta_grid, "lo:hi:n")->required();
  e->add_option("--episodes", eval.episodes, "Episodes per beta")->required();
  e->add_option("--seed", eval.seed, "Seed");
  e->add_option("--height", eval.height, "Pin the gap-step obstacle height");
  e->add_option("--out", eval.out, "Report file (default stdout)");

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle", "Exact return distribution of a deterministic policy");
  o->add_option("--env", oracle.env, "Environment name")->required();
  o->add_option("--policy", oracle.policy, "ckpt:<file> | scripted:<safe|risky|refuse|attempt>")->required();
  o->add_option("--beta", oracle.beta, "Risk parameter fed to the policy");
  o->add_option("--height", oracle.height, "Pin the gap-step obstacle height");
  o->add_flag("--stochastic", oracle.stochastic, "Sample actions (rejected: the oracle needs mean actions)");
  o->add_option("--atoms", oracle.atoms, "Quantile atoms in the compressed distribution");
  o->add_option("--seed", oracle.seed, "Seed for the Monte Carlo fallback");
  o->add_option("--out", oracle.out, "Output file (default stdout)");

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Draw SVG charts from evaluation reports");
  p->add_option("--eval", plot.reports, "Evaluation report(s)")->required()->expected(1, -1);
  p->add_option("--out", plot.out, "Output directory")->required();

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run a checkpoint live with WebSocket risk steering");
  s->add_option("--ckpt", serve.ckpt, "Checkpoint file")->required();
  s->add_option("--env", serve.env, "Environment name")->required();
  s->add_option("--host", serve.host, "Listen address");
  s->add_option("--port", serve.port, "TCP port (0 = any free port)");
  s->add_option("--tick-hz", serve.tick_hz, "Simulation ticks per second");
  s->add_option("--ui-dir", serve.ui_dir, "Directory with the operator UI bundle");
  s->add_option("--seed", serve.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(eval);
    if (*o) return cmd_oracle(oracle);
    if (*p) return cmd_plot(plot);
    if (*s) return cmd_serve(serve);
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

// Command-line front end: train, eval, compare, export-plots, print-config.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "peatsim/harness.hpp"

namespace fs = std::filesystem;
using namespace peatsim;

namespace {

struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::string agent;
  std::string mode;
  std::int64_t seed = -1;
  std::int64_t steps = -1;
  bool full_scale = false;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", sets, "override one key, e.g. --set ppo.actor_lr=1e-4");
    app->add_option("--agent", agent, "sabppo | iterrl | happo | random | fixed");
    app->add_option("--mode", mode, "fedpeat | fedpeft | fedft");
    app->add_option("--seed", seed, "experiment seed");
    app->add_option("--steps", steps, "total training steps");
    app->add_flag("--full-scale", full_scale, "train for the full 5,000,000 steps");
  }

  // Precedence: defaults < config file < --full-scale < named flags < --set.
  harness::ExperimentConfig build() const {
    harness::ExperimentConfig config;
    if (!config_file.empty()) config = harness::load_config(config_file);
    if (full_scale) config.total_steps = harness::kFullSteps;
    if (!agent.empty()) config.agent = harness::parse_agent(agent);
    if (!mode.empty()) config.env.mode = federation::parse_mode(mode);
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (steps >= 0) config.total_steps = steps;
    for (const auto& s : sets) harness::apply_override(config, s);
    config.validate();
    return config;
  }
};

std::string default_run_name(const harness::ExperimentConfig& c) {
  return harness::to_string(c.agent) + "-" + federation::to_string(c.env.mode) + "-s" +
         std::to_string(c.seed);
}

void print_eval(const harness::EvalSummary& e) {
  std::cout << "episodes    " << e.episodes << '\n'
            << "reward      " << e.reward << "  (r_d " << e.r_d << ", r_p " << e.r_p << ", r_s "
            << e.r_s << ", penalty " << e.penalty << ")\n"
            << "perplexity  " << e.perplexity << '\n'
            << "log_delay   " << e.log_delay << '\n'
            << "delay_s     " << e.delay << '\n'
            << "exchanges   " << e.exchanges << " per device per 10 rounds\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated emulator-assisted fine-tuning simulator and controllers"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  std::string run_name, out_root;
  bool resume = false, quiet = false;
  std::int64_t stop_after = -1;
  auto* train = app.add_subcommand("train", "train a controller and record metrics");
  train_flags.attach(train);
  train->add_option("--name", run_name, "run directory name (default agent-mode-sSEED)");
  train->add_option("--out", out_root, "output root (default $PEATSIM_OUTPUT_ROOT or ./runs)");
  train->add_flag("--resume", resume, "continue from the run's checkpoint");
  train->add_option("--stop-after", stop_after,
                    "pause at the first checkpoint at or after this step; continue with --resume");
  train->add_flag("-q,--quiet", quiet, "no progress lines");

  std::string eval_run, rounds_out;
  int eval_episodes = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a trained run on the fixed evaluation seeds");
  eval->add_option("run", eval_run, "run directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--episodes", eval_episodes, "override the number of episodes");
  eval->add_option("--rounds-out", rounds_out, "write per-round JSON lines here");

  std::vector<std::string> compare_runs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "tabulate final metrics and pairwise ratios");
  compare->add_option("runs", compare_runs, "run directories")->required()->expected(2, -1);
  compare->add_option("--out", compare_out, "directory for comparison_runs.csv / comparison_pairs.csv");

  std::vector<std::string> plot_runs;
  std::string plot_out;
  auto* plots = app.add_subcommand("export-plots", "write one SVG per metric");
  plots->add_option("runs", plot_runs, "run directories")->required()->expected(1, -1);
  plots->add_option("--out", plot_out, "output directory (default <first run>/plots)");

  ConfigFlags print_flags;
  auto* print = app.add_subcommand("print-config", "print the effective configuration");
  print_flags.attach(print);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      auto config = train_flags.build();
      const fs::path root = out_root.empty() ? harness::output_root() : fs::path(out_root);
      const fs::path dir = root / (run_name.empty() ? default_run_name(config) : run_name);
      if (!resume && fs::exists(dir / "manifest.json")) {
        std::cerr << "error: " << dir.string()
                  << " already holds a run; pass --resume or choose another --name\n";
        return 2;
      }
      harness::TrainOptions opts;
      opts.resume = resume;
      opts.stop_after = stop_after;
      opts.log = quiet ? nullptr : &std::cerr;
      const auto result = harness::train(config, dir, opts);
      std::cout << dir.string() << '\n';
      if (result.interrupted) std::cout << "paused at step " << result.steps << '\n';
      if (!result.metrics.empty()) print_eval(result.metrics.back().eval);
      if (result.updates > 0) {
        std::cout << "updates     " << result.updates << ", mean " << result.mean_update_seconds
                  << " s\n";
      }
    } else if (*eval) {
      harness::ExperimentConfig config;
      auto agent = harness::load_agent(eval_run, &config);
      if (eval_episodes > 0) config.eval_episodes = eval_episodes;
      std::ofstream rounds;
      if (!rounds_out.empty()) rounds.open(rounds_out, std::ios::trunc);
      print_eval(harness::evaluate(*agent, config, 0, rounds_out.empty() ? nullptr : &rounds));
    } else if (*compare) {
      const auto c = harness::compare_runs({compare_runs.begin(), compare_runs.end()});
      std::cout << c.table;
      if (!compare_out.empty()) {
        fs::create_directories(compare_out);
        std::ofstream(fs::path(compare_out) / "comparison_runs.csv") << c.runs_csv;
        std::ofstream(fs::path(compare_out) / "comparison_pairs.csv") << c.pairs_csv;
      }
    } else if (*plots) {
      const fs::path out = plot_out.empty() ? fs::path(plot_runs.front()) / "plots" : fs::path(plot_out);
      for (const auto& p : harness::export_plots({plot_runs.begin(), plot_runs.end()}, out, &std::cerr)) {
        std::cout << p.string() << '\n';
      }
    } else if (*print) {
      std::cout << harness::serialize(print_flags.build());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

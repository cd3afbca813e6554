#pragma once

// Experiment plumbing: configuration files, the train/eval loops, run
// directories, comparison tables and SVG plots.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "peatsim/agents.hpp"
#include "peatsim/env.hpp"

namespace peatsim::harness {

enum class AgentKind { kSabppo, kIterRl, kHappo, kRandom, kFixed };

std::string to_string(AgentKind kind);
AgentKind parse_agent(std::string_view text);

inline constexpr std::int64_t kDeskSteps = 200'000;
inline constexpr std::int64_t kFullSteps = 5'000'000;

struct ExperimentConfig {
  env::EnvConfig env;
  agents::PpoConfig ppo;
  AgentKind agent = AgentKind::kSabppo;
  std::int64_t total_steps = kDeskSteps;
  std::int64_t eval_interval = 5000;
  int eval_episodes = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One `key = value` line per field, grouped with unit comments.
std::string serialize(const ExperimentConfig& config);
/// Starts from `base` and applies every assignment in `text`. Unknown keys,
/// malformed values and duplicate keys raise ConfigError naming the line.
ExperimentConfig parse_config(std::string_view text, const ExperimentConfig& base = {});
ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base = {});
/// Applies a single `key=value` override.
void apply_override(ExperimentConfig& config, std::string_view assignment);
std::vector<std::string> config_keys();

std::unique_ptr<agents::Agent> make_agent(const ExperimentConfig& config);

/// Reset seed of the i-th training or evaluation episode.
std::uint64_t train_episode_seed(const ExperimentConfig& config, std::int64_t episode);
std::uint64_t eval_episode_seed(const ExperimentConfig& config, int episode);

struct EvalSummary {
  double reward = 0.0;      // mean episode return
  double r_d = 0.0;         // mean per-episode sums of each reward term
  double r_p = 0.0;
  double r_s = 0.0;
  double penalty = 0.0;
  double perplexity = 0.0;  // mean device perplexity at episode end
  double log_delay = 0.0;   // mean over rounds of log(max Q)
  double delay = 0.0;       // mean over rounds of max Q, seconds
  double exchanges = 0.0;   // emulator exchanges per device per 10 rounds
  int episodes = 0;
};

/// Runs the fixed evaluation episodes. Learning agents act greedily; the random
/// policy draws from a stream keyed by `policy_index`. Writes one JSON line per
/// round to `rounds` when given.
EvalSummary evaluate(agents::Agent& agent, const ExperimentConfig& config,
                     std::uint64_t policy_index, std::ostream* rounds = nullptr);

inline constexpr const char* kMetricsHeader =
    "step,eval_reward,r_d,r_p,r_s,penalty,perplexity,log_delay,delay,exchanges";

struct MetricsRow {
  std::int64_t step = 0;
  EvalSummary eval;
};

std::string format_metrics_row(const MetricsRow& row);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

struct TrainOptions {
  bool resume = false;
  /// Stop at the first checkpoint boundary at or after this step (negative: never).
  /// The run can be continued later with `resume`.
  std::int64_t stop_after = -1;
  std::ostream* log = nullptr;  // progress lines; silent when null
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::int64_t steps = 0;
  int updates = 0;
  double mean_update_seconds = 0.0;
  bool resumed = false;
  bool interrupted = false;  // stopped by stop_after; no completion.json
};

/// Trains into `run_dir`: manifest.json, config.txt, metrics.csv, timing.csv,
/// rounds.jsonl (final evaluation), checkpoint.{bin,json}, completion.json.
TrainResult train(const ExperimentConfig& config, const std::filesystem::path& run_dir,
                  const TrainOptions& options = {});

/// Loads the run's config and latest checkpoint.
std::unique_ptr<agents::Agent> load_agent(const std::filesystem::path& run_dir,
                                          ExperimentConfig* config_out = nullptr);

struct RunSummary {
  std::filesystem::path dir;
  std::string name;
  ExperimentConfig config;
  MetricsRow final;
};

RunSummary summarize_run(const std::filesystem::path& run_dir);

struct Comparison {
  std::vector<RunSummary> runs;
  std::string runs_csv;   // one row per run
  std::string pairs_csv;  // one row per ordered pair a < b
  std::string table;      // both, aligned for reading
};

/// Per-run final metrics and, for each pair (a, b), delay and exchange ratios a/b
/// with perplexity and reward differences a - b. Refuses runs whose N or T differ.
Comparison compare_runs(const std::vector<std::filesystem::path>& run_dirs);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

std::string render_svg(const PlotSpec& spec);

/// Writes reward.svg, log_delay.svg, exchanges.svg and perplexity.svg into
/// `out_dir`, one polyline per run. Runs with empty metrics are skipped with a
/// warning on `log`. Returns the files written.
std::vector<std::filesystem::path> export_plots(const std::vector<std::filesystem::path>& run_dirs,
                                                const std::filesystem::path& out_dir,
                                                std::ostream* log = nullptr);

/// `PEATSIM_OUTPUT_ROOT` when set, otherwise ./runs.
std::filesystem::path output_root();

}  // namespace peatsim::harness

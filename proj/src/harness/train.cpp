#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "peatsim/harness.hpp"

#ifndef PEATSIM_VERSION
#define PEATSIM_VERSION "unknown"
#endif

namespace peatsim::harness {

namespace fs = std::filesystem;

std::unique_ptr<agents::Agent> make_agent(const ExperimentConfig& config) {
  const env::FederatedEnv probe(config.env);
  const int obs = probe.observation_size();
  auto specs = probe.branch_specs();
  switch (config.agent) {
    case AgentKind::kSabppo: return agents::make_sabppo(obs, specs, config.ppo, config.seed);
    case AgentKind::kHappo: return agents::make_happo(obs, specs, config.ppo, config.seed);
    case AgentKind::kIterRl: return agents::make_iterrl(obs, specs, config.ppo, config.seed);
    case AgentKind::kRandom: return std::make_unique<agents::RandomPolicy>(specs);
    case AgentKind::kFixed:
      return std::make_unique<agents::FixedPolicy>(specs, config.env.rounds);
  }
  throw ConfigError("unknown agent kind");
}

std::uint64_t train_episode_seed(const ExperimentConfig& config, std::int64_t episode) {
  return make_stream(config.seed, streams::kTrainEpisode, static_cast<std::uint64_t>(episode))();
}

std::uint64_t eval_episode_seed(const ExperimentConfig& config, int episode) {
  return make_stream(config.seed, streams::kEvalEpisode, static_cast<std::uint64_t>(episode))();
}

EvalSummary evaluate(agents::Agent& agent, const ExperimentConfig& config,
                     std::uint64_t policy_index, std::ostream* rounds) {
  env::FederatedEnv env(config.env);
  Rng rng = make_stream(config.seed, streams::kEvalPolicy, policy_index);
  const bool greedy = agent.trainable();
  const double n = config.env.num_devices;
  const double t = config.env.rounds;

  EvalSummary s;
  for (int e = 0; e < config.eval_episodes; ++e) {
    auto obs = env.reset(eval_episode_seed(config, e));
    while (!env.done()) {
      const auto decision = agent.act(obs.features, rng, greedy);
      const int round = env.round();
      auto res = env.step(env.decode_branch_actions(decision.actions));
      const auto& r = res.reward;
      s.reward += r.total;
      s.r_d += r.r_d;
      s.r_p += r.r_p;
      s.r_s += r.r_s;
      s.penalty += r.penalty;
      s.log_delay += r.log_delay;
      s.delay += res.outcome.max_delay;
      if (rounds != nullptr) {
        std::vector<int> counts;
        for (const auto& d : env.world().devices) counts.push_back(d.state.exchange_count);
        auto row = federation::round_to_json(res.outcome, round, config.env.mode, counts);
        row["episode"] = e;
        row["reward"] = {{"r_d", r.r_d}, {"r_p", r.r_p}, {"r_s", r.r_s},
                         {"penalty", r.penalty}, {"total", r.total}};
        *rounds << row.dump() << '\n';
      }
      obs = std::move(res.observation);
    }
    double p = 0.0, x = 0.0;
    for (const auto& d : env.world().devices) {
      p += d.state.perplexity;
      x += d.state.exchange_count;
    }
    s.perplexity += p / n;
    s.exchanges += x / n / (t / 10.0);
  }
  const double episodes = config.eval_episodes;
  for (double* v : {&s.reward, &s.r_d, &s.r_p, &s.r_s, &s.penalty, &s.perplexity, &s.exchanges}) {
    *v /= episodes;
  }
  s.log_delay /= episodes * t;
  s.delay /= episodes * t;
  s.episodes = config.eval_episodes;
  return s;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

// Keeps the header and every data row whose leading step is at most `step`.
void truncate_rows(const fs::path& path, std::int64_t step) {
  std::ifstream in(path);
  if (!in) return;
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header || std::stoll(line.substr(0, line.find(','))) <= step) kept += line + '\n';
    header = false;
  }
  in.close();
  write_text(path, kept);
}

}  // namespace

std::string format_metrics_row(const MetricsRow& row) {
  const auto& e = row.eval;
  std::string out = std::to_string(row.step);
  for (double v : {e.reward, e.r_d, e.r_p, e.r_s, e.penalty, e.perplexity, e.log_delay, e.delay,
                   e.exchanges}) {
    out += ',' + num(v);
  }
  return out;
}

std::vector<MetricsRow> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ConfigError(path.string() + " does not start with the metrics header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw ConfigError("malformed metrics row: " + line);
    MetricsRow r;
    r.step = std::stoll(cells[0]);
    double* dst[] = {&r.eval.reward,     &r.eval.r_d,       &r.eval.r_p,
                     &r.eval.r_s,        &r.eval.penalty,   &r.eval.perplexity,
                     &r.eval.log_delay,  &r.eval.delay,     &r.eval.exchanges};
    for (std::size_t i = 0; i < 9; ++i) *dst[i] = std::strtod(cells[i + 1].c_str(), nullptr);
    rows.push_back(r);
  }
  return rows;
}

TrainResult train(const ExperimentConfig& config_in, const fs::path& run_dir,
                  const TrainOptions& options) {
  ExperimentConfig config = config_in;
  const fs::path config_path = run_dir / "config.txt";
  const fs::path metrics_path = run_dir / "metrics.csv";
  const fs::path timing_path = run_dir / "timing.csv";
  const fs::path checkpoint_stem = run_dir / "checkpoint";
  const bool resume = options.resume && fs::exists(fs::path(checkpoint_stem).concat(".json"));
  if (resume) config = load_config(config_path);
  config.validate();

  auto agent = make_agent(config);
  env::FederatedEnv env(config.env);
  Rng policy_rng = make_stream(config.seed, streams::kPolicy);
  std::int64_t step = 0;
  std::int64_t episode = 0;
  std::int64_t eval_index = 0;
  std::int64_t last_eval_step = -1;
  TrainResult result;
  std::vector<double> update_times;

  if (resume) {
    const auto archive = neural::ParameterArchive::load(checkpoint_stem);
    agent->load(archive);
    step = std::stoll(archive.text("trainer.step"));
    episode = std::stoll(archive.text("trainer.episode"));
    eval_index = std::stoll(archive.text("trainer.eval_index"));
    last_eval_step = std::stoll(archive.text("trainer.last_eval_step"));
    std::istringstream(archive.text("trainer.policy_rng")) >> policy_rng;
    truncate_rows(metrics_path, step);
    truncate_rows(timing_path, step);
    result.metrics = read_metrics(metrics_path);
    result.resumed = true;
    if (options.log) *options.log << "resuming " << run_dir.string() << " at step " << step << '\n';
  } else {
    fs::create_directories(run_dir);
    write_text(config_path, serialize(config));
    nlohmann::json manifest;
    nlohmann::json snapshot;
    std::istringstream cfg(serialize(config));
    for (std::string line; std::getline(cfg, line);) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find(" = ");
      auto value = line.substr(eq + 3);
      value = value.substr(0, value.find("  #"));
      snapshot[line.substr(0, eq)] = value;
    }
    manifest["config"] = snapshot;
    manifest["code_version"] = PEATSIM_VERSION;
    manifest["seed"] = config.seed;
    manifest["start_time"] = timestamp();
    manifest["files"] = {{"config", "config.txt"},
                         {"metrics", "metrics.csv"},
                         {"timing", "timing.csv"},
                         {"rounds", "rounds.jsonl"},
                         {"checkpoint", {"checkpoint.bin", "checkpoint.json"}},
                         {"completion", "completion.json"},
                         {"plots", "plots/"}};
    write_text(run_dir / "manifest.json", manifest.dump(2) + '\n');
    write_text(metrics_path, std::string(kMetricsHeader) + '\n');
    write_text(timing_path, "step,update_seconds\n");
    fs::remove(run_dir / "rounds.jsonl");
    fs::remove(run_dir / "completion.json");
  }

  std::ofstream metrics(metrics_path, std::ios::app);
  std::ofstream timing(timing_path, std::ios::app);
  agents::Trajectory segment;
  env::Observation obs;
  bool need_reset = true;

  auto save_checkpoint = [&] {
    neural::ParameterArchive archive;
    agent->save(archive);
    archive.put_text("trainer.step", std::to_string(step));
    archive.put_text("trainer.episode", std::to_string(episode));
    archive.put_text("trainer.eval_index", std::to_string(eval_index));
    archive.put_text("trainer.last_eval_step", std::to_string(last_eval_step));
    std::ostringstream rng;
    rng << policy_rng;
    archive.put_text("trainer.policy_rng", rng.str());
    archive.put_text("trainer.agent", to_string(config.agent));
    archive.save(checkpoint_stem);
  };

  while (config.total_steps > 0) {
    const bool at_eval = step % config.eval_interval == 0 || step == config.total_steps;
    if (at_eval && step > last_eval_step) {
      std::ofstream rounds;
      const bool last = step == config.total_steps;
      if (last) rounds.open(run_dir / "rounds.jsonl", std::ios::trunc);
      MetricsRow row{step, evaluate(*agent, config, static_cast<std::uint64_t>(eval_index),
                                    last ? &rounds : nullptr)};
      ++eval_index;
      last_eval_step = step;
      metrics << format_metrics_row(row) << '\n';
      metrics.flush();
      timing.flush();
      result.metrics.push_back(row);
      if (options.log) {
        *options.log << to_string(config.agent) << " step " << step << " reward "
                     << num(row.eval.reward) << " perplexity " << num(row.eval.perplexity)
                     << " delay " << num(row.eval.delay) << " exchanges "
                     << num(row.eval.exchanges) << '\n';
      }
      // Checkpoints only at episode and segment boundaries, so the saved state
      // is complete without the environment or a partial trajectory.
      if (need_reset && segment.empty()) save_checkpoint();
    }
    if (step >= config.total_steps) break;
    if (options.stop_after >= 0 && step >= options.stop_after && need_reset && segment.empty()) {
      save_checkpoint();
      result.interrupted = true;
      break;
    }

    if (need_reset) {
      obs = env.reset(train_episode_seed(config, episode++));
      need_reset = false;
    }
    auto decision = agent->act(obs.features, policy_rng, false);
    auto res = env.step(env.decode_branch_actions(decision.actions));
    ++step;
    if (agent->trainable()) {
      agents::Transition tr;
      tr.observation = std::move(obs.features);
      tr.chained_inputs = std::move(decision.chained_inputs);
      tr.actions = std::move(decision.actions);
      tr.branch_log_probs = std::move(decision.branch_log_probs);
      tr.joint_log_prob = decision.joint_log_prob;
      tr.reward = res.reward.total;
      tr.values = std::move(decision.values);
      tr.next_observation = res.observation.features;
      tr.done = res.done;
      segment.push_back(std::move(tr));
    }
    obs = std::move(res.observation);
    need_reset = res.done;

    if (static_cast<int>(segment.size()) == config.ppo.segment_length) {
      const auto t0 = std::chrono::steady_clock::now();
      agent->update(segment);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      update_times.push_back(secs);
      timing << step << ',' << num(secs) << '\n';
      segment.clear();
    }
  }

  result.steps = step;
  result.updates = static_cast<int>(update_times.size());
  if (!update_times.empty()) {
    result.mean_update_seconds =
        std::accumulate(update_times.begin(), update_times.end(), 0.0) / update_times.size();
  }
  if (result.interrupted) return result;
  if (config.total_steps > 0 && !(need_reset && segment.empty())) save_checkpoint();
  nlohmann::json done{{"end_time", timestamp()}, {"steps", step}, {"updates", result.updates}};
  write_text(run_dir / "completion.json", done.dump(2) + '\n');
  return result;
}

std::unique_ptr<agents::Agent> load_agent(const fs::path& run_dir, ExperimentConfig* config_out) {
  const ExperimentConfig config = load_config(run_dir / "config.txt");
  auto agent = make_agent(config);
  const fs::path stem = run_dir / "checkpoint";
  if (agent->trainable()) {
    if (!fs::exists(fs::path(stem).concat(".json"))) {
      throw ConfigError(run_dir.string() + " has no checkpoint");
    }
    agent->load(neural::ParameterArchive::load(stem));
  }
  if (config_out) *config_out = config;
  return agent;
}

}  // namespace peatsim::harness

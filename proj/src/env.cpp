#include "peatsim/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace peatsim::env {

using federation::FederationMode;

void EnvConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (num_devices < 1) fail("num_devices must be >= 1");
  if (select_k < 1 || select_k > num_devices) fail("select_k must lie in [1, num_devices]");
  if (rounds < 1) fail("rounds must be >= 1");
  if (levels < 1) fail("levels must be >= 1");
  if (retention_grid.empty()) fail("retention_grid must not be empty");
  for (double r : retention_grid) {
    if (!(r > 0.0 && r <= 1.0)) fail("retention_grid values must lie in (0, 1]");
  }
  if (!(q > 0.0) || !(c > 0.0)) fail("q and c must be positive");
  if (!(bandwidth_min > 0.0) || bandwidth_max < bandwidth_min) fail("bad bandwidth range");
  if (!(memory_min > 0.0) || memory_max < memory_min) fail("bad memory range");
  if (!(compute_speed_min > 0.0) || compute_speed_max < compute_speed_min) fail("bad speed range");
  if (!(data_min > 0.0) || data_max < data_min) fail("bad data range");
  if (!(server_data_fraction >= 0.0 && server_data_fraction < 1.0)) {
    fail("server_data_fraction must lie in [0, 1)");
  }
  if (adapter_dim < 1) fail("adapter_dim must be >= 1");
  if (tuning.epochs < 0) fail("epochs must be >= 0");
  if (mobility.speed_min < 0.0 || mobility.speed_max < mobility.speed_min) fail("bad speed_range");
  try {
    model.validate();
    channel.validate();
  } catch (const DomainError& e) {
    fail(e.what());
  }
}

RewardBreakdown compute_reward(const EnvConfig& config, const federation::World& world,
                               const federation::RoundOutcome& outcome) {
  const double n = static_cast<double>(world.devices.size());
  const double t = static_cast<double>(config.rounds);
  RewardBreakdown r;
  r.log_delay = std::log(std::max(outcome.max_delay, config.delay_floor));
  double p_sum = 0.0;
  for (const auto& dev : world.devices) p_sum += dev.state.perplexity;
  r.mean_perplexity = p_sum / n;
  const double chi = std::accumulate(outcome.exchanges.begin(), outcome.exchanges.end(), 0.0);

  r.r_d = -config.xi_f * r.log_delay / t;
  r.r_p = -config.xi_p * r.mean_perplexity / t;
  r.r_s = -config.xi_s * (chi / n) / t;

  for (int idx : outcome.participation) {
    const auto& dev = world.devices[idx];
    if (dev.state.memory_used > dev.profile.memory_capacity / config.q) ++r.memory_violations;
  }
  const double exchange_cap = t / config.c;
  for (const auto& dev : world.devices) {
    if (dev.state.exchange_count > exchange_cap) ++r.exchange_violations;
  }
  r.penalty = config.kappa * (r.memory_violations + r.exchange_violations);
  r.total = r.r_d + r.r_p + r.r_s + r.penalty;
  return r;
}

FederatedEnv::FederatedEnv(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

Observation FederatedEnv::reset(std::uint64_t seed) {
  Rng rng = make_stream(seed, streams::kWorld);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  federation::World w;
  w.model = config_.model;
  w.adapter = sim::make_adapter(w.model, static_cast<std::size_t>(config_.adapter_dim));
  for (double& v : w.adapter.weights) v = 0.1 * normal(rng);
  w.surrogate = config_.surrogate;
  w.channel = config_.channel;
  w.channel.bandwidth_budget = uniform(config_.bandwidth_min, config_.bandwidth_max);
  w.mobility = config_.mobility;
  w.tuning = config_.tuning;
  w.mobility_rng = make_stream(seed, streams::kMobility);
  w.fading_rng = make_stream(seed, streams::kFading);
  w.tuning_rng = make_stream(seed, streams::kTuning);

  auto make_optimum = [&] {
    std::vector<double> opt(static_cast<std::size_t>(config_.adapter_dim));
    for (double& v : opt) v = normal(rng);
    return opt;
  };

  double device_data = 0.0;
  w.devices.resize(static_cast<std::size_t>(config_.num_devices));
  for (int n = 0; n < config_.num_devices; ++n) {
    auto& dev = w.devices[n];
    dev.profile.id = n + 1;
    dev.profile.memory_capacity = uniform(config_.memory_min, config_.memory_max);
    dev.profile.compute_speed = uniform(config_.compute_speed_min, config_.compute_speed_max);
    dev.profile.data_size = std::round(uniform(config_.data_min, config_.data_max));
    dev.profile.is_server = false;
    dev.state.position = wireless::sample_in_disc(config_.mobility.area_radius, rng);
    dev.state.perplexity = config_.surrogate.p_init;
    dev.mobility = wireless::init_mobility(dev.state.position, config_.mobility, rng);
    dev.adapter_optimum = make_optimum();
    device_data += dev.profile.data_size;
  }

  auto& srv = w.server;
  srv.profile.id = 0;
  srv.profile.is_server = true;
  srv.profile.memory_capacity = 10.0 * config_.model.total_bytes;
  srv.profile.compute_speed = config_.server_speed_factor * config_.compute_speed_max;
  const double f = config_.server_data_fraction;
  srv.profile.data_size = f > 0.0 ? std::round(device_data * f / (1.0 - f)) : 0.0;
  srv.state.perplexity = config_.surrogate.p_init;
  srv.state.current_retention = 1.0;
  srv.adapter_optimum = make_optimum();

  world_ = std::move(w);
  federation::refresh_gains(world_);
  started_ = true;
  return observe();
}

Observation FederatedEnv::observe() const {
  const int n = config_.num_devices;
  Observation obs;
  obs.features.assign(static_cast<std::size_t>(3 * n + 1), 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& dev = world_.devices[i];
    obs.features[i] = 10.0 * std::log10(std::max(dev.gain, 1e-30)) / 100.0;
    obs.features[n + i] = dev.profile.memory_capacity / kGigabyte / 4.0;
    obs.features[2 * n + i] = static_cast<double>(dev.state.exchange_count) / config_.rounds;
  }
  obs.features[3 * n] = static_cast<double>(world_.round) / config_.rounds;
  return obs;
}

void FederatedEnv::validate_action(const ActionBundle& a) const {
  const auto k = static_cast<std::size_t>(config_.select_k);
  if (a.selection.size() != k || a.bandwidth_levels.size() != k || a.power_levels.size() != k ||
      a.retentions.size() != k) {
    throw DecodeError("action must carry exactly select_k entries per component");
  }
  std::vector<bool> seen(static_cast<std::size_t>(config_.num_devices), false);
  for (std::size_t i = 0; i < k; ++i) {
    const int n = a.selection[i];
    if (n < 0 || n >= config_.num_devices) throw DecodeError("selected device out of range");
    if (seen[n]) throw DecodeError("duplicate device in selection");
    seen[n] = true;
    if (a.bandwidth_levels[i] < 1 || a.bandwidth_levels[i] > config_.levels ||
        a.power_levels[i] < 1 || a.power_levels[i] > config_.levels) {
      throw DecodeError("allocation level out of range");
    }
    if (std::find(config_.retention_grid.begin(), config_.retention_grid.end(), a.retentions[i]) ==
        config_.retention_grid.end()) {
      throw DecodeError("retention not on the configured grid");
    }
  }
}

StepResult FederatedEnv::step(const ActionBundle& action) {
  if (!started_) throw std::logic_error("reset() must be called before step()");
  if (done()) throw std::logic_error("episode already finished");
  validate_action(action);

  StepResult result;
  result.outcome = federation::run_round(world_, action, config_.mode);
  result.reward = compute_reward(config_, world_, result.outcome);
  federation::advance_channels(world_);
  result.done = done();
  result.observation = observe();
  return result;
}

ActionBundle FederatedEnv::decode_branch_actions(const BranchActions& raw) const {
  if (raw.groups.size() != 4) throw DecodeError("expected four branch groups");
  const auto k = static_cast<std::size_t>(config_.select_k);
  for (const auto& g : raw.groups) {
    if (g.size() != k) throw DecodeError("every branch group must hold select_k indices");
  }
  ActionBundle a;
  std::vector<bool> seen(static_cast<std::size_t>(config_.num_devices), false);
  for (int n : raw.groups[0]) {
    if (n < 0 || n >= config_.num_devices) throw DecodeError("selection index out of range");
    if (seen[n]) throw DecodeError("duplicate selection index");
    seen[n] = true;
  }
  a.selection = raw.groups[0];
  auto level = [&](int idx) {
    if (idx < 0 || idx >= config_.levels) throw DecodeError("level index out of range");
    return idx + 1;
  };
  for (std::size_t i = 0; i < k; ++i) {
    a.bandwidth_levels.push_back(level(raw.groups[1][i]));
    a.power_levels.push_back(level(raw.groups[2][i]));
    const int r = raw.groups[3][i];
    if (r < 0 || r >= static_cast<int>(config_.retention_grid.size())) {
      throw DecodeError("retention index out of range");
    }
    a.retentions.push_back(config_.retention_grid[r]);
  }
  return a;
}

std::vector<BranchSpec> FederatedEnv::branch_specs() const {
  using Kind = BranchSpec::Kind;
  const int n = config_.num_devices;
  const int k = config_.select_k;
  const int g = static_cast<int>(config_.retention_grid.size());
  return {
      {Kind::kSelection, n, k, 0, BranchEncoding::kMask, "selection"},
      {Kind::kPerDevice, n, k, config_.levels, BranchEncoding::kShare, "bandwidth"},
      {Kind::kPerDevice, n, k, config_.levels, BranchEncoding::kShare, "power"},
      {Kind::kPerDevice, n, k, g, BranchEncoding::kNone, "retention"},
  };
}

}  // namespace peatsim::env

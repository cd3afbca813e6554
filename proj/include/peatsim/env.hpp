#pragma once

// Episodic control environment over the federated world. One step is one
// federated round; the controller picks devices, bandwidth/power levels and
// per-device emulator retention.

#include <cstdint>
#include <vector>

#include "peatsim/action.hpp"
#include "peatsim/federation.hpp"

namespace peatsim::env {

struct EnvConfig {
  federation::FederationMode mode = federation::FederationMode::kFedPEAT;
  int num_devices = 10;
  int select_k = 5;
  int rounds = 100;  // T
  std::vector<double> retention_grid{0.25, 0.5, 0.75, 1.0};
  int levels = 4;  // L, discrete bandwidth/power levels

  // reward weights and constraint constants
  double xi_p = 5.0;
  double xi_f = -10.0;
  double xi_s = 25.0;
  double kappa = -50.0;
  double q = 2.0;
  double c = 5.0;
  Seconds delay_floor = 1e-6;

  sim::ModelSpec model;
  sim::PerplexitySurrogate surrogate;
  wireless::ChannelParams channel;
  Hertz bandwidth_min = 7e9;  // per-episode budget draw
  Hertz bandwidth_max = 20e9;
  wireless::MobilityModel mobility;
  federation::TuningParams tuning;
  int adapter_dim = 64;

  Bytes memory_min = 1.0 * kGigabyte;
  Bytes memory_max = 4.0 * kGigabyte;
  double compute_speed_min = 5e9;
  double compute_speed_max = 5e10;
  double server_speed_factor = 10.0;  // times compute_speed_max
  double data_min = 5.0;
  double data_max = 15.0;
  double server_data_fraction = 0.3;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct Observation {
  std::vector<double> features;  // [gain_db/100 (N), capacity_gb/4 (N), exchanges/T (N), round/T]
};

struct RewardBreakdown {
  double r_d = 0.0;
  double r_p = 0.0;
  double r_s = 0.0;
  double penalty = 0.0;
  double total = 0.0;
  int memory_violations = 0;
  int exchange_violations = 0;
  double log_delay = 0.0;
  double mean_perplexity = 0.0;
};

struct StepResult {
  Observation observation;
  RewardBreakdown reward;
  bool done = false;
  federation::RoundOutcome outcome;
};

/// Reward terms for one round, computed from its outcome and the post-round world.
RewardBreakdown compute_reward(const EnvConfig& config, const federation::World& world,
                               const federation::RoundOutcome& outcome);

class FederatedEnv {
 public:
  explicit FederatedEnv(EnvConfig config);

  Observation reset(std::uint64_t seed);
  StepResult step(const ActionBundle& action);

  ActionBundle decode_branch_actions(const BranchActions& raw) const;
  std::vector<BranchSpec> branch_specs() const;

  int observation_size() const { return 3 * config_.num_devices + 1; }
  int round() const { return world_.round; }
  bool done() const { return world_.round >= config_.rounds; }
  const EnvConfig& config() const { return config_; }
  const federation::World& world() const { return world_; }
  federation::World& mutable_world() { return world_; }

  Observation observe() const;

 private:
  void validate_action(const ActionBundle& action) const;

  EnvConfig config_;
  federation::World world_;
  bool started_ = false;
};

}  // namespace peatsim::env

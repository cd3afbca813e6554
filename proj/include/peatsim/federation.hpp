#pragma once

// One federated tuning round: emulator dissemination, local adapter tuning on
// the selected devices plus the server, and weighted adapter aggregation.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "peatsim/action.hpp"
#include "peatsim/common.hpp"
#include "peatsim/sim_core.hpp"
#include "peatsim/wireless.hpp"

namespace peatsim::federation {

enum class FederationMode {
  kFedPEAT,  // per-device emulators chosen by the controller
  kFedPEFT,  // full frozen backbone (retention 1.0), adapters only
  kFedFT,    // whole model shipped and trained every round
};

std::string to_string(FederationMode mode);
FederationMode parse_mode(std::string_view text);

struct Device {
  sim::DeviceProfile profile;
  sim::DeviceState state;
  wireless::MobilityState mobility;
  std::vector<double> adapter_optimum;
  double gain = 0.0;
};

struct TuningParams {
  int epochs = 2;
  double adapter_step = 0.3;
  double adapter_noise = 0.01;
};

struct World {
  sim::ModelSpec model;
  sim::AdapterSpec adapter;  // adapter.weights holds the current global adapter
  sim::PerplexitySurrogate surrogate;
  wireless::ChannelParams channel;
  wireless::MobilityModel mobility;
  TuningParams tuning;
  Device server;
  std::vector<Device> devices;
  int round = 0;
  Rng mobility_rng;
  Rng fading_rng;
  Rng tuning_rng;
};

struct Dissemination {
  int device = 0;
  bool changed = false;    // a downlink model transfer happens this round
  bool exchanged = false;  // counts as an emulator exchange
  sim::EmulatorSpec emulator;
};

/// Assigns emulators to the selected devices and updates their state.
/// `retentions` follows `selection` order and is ignored outside FedPEAT.
std::vector<Dissemination> disseminate(std::span<Device> devices, const sim::ModelSpec& model,
                                       const sim::AdapterSpec& adapter,
                                       std::span<const int> selection,
                                       std::span<const double> retentions, FederationMode mode);

struct TuningResult {
  std::vector<double> adapter;
  double perplexity = 0.0;
};

TuningResult local_tuning(const Device& device, const sim::EmulatorSpec& emulator,
                          std::vector<double> adapter, const sim::PerplexitySurrogate& surrogate,
                          const TuningParams& params, Rng& rng);

/// Data-size weighted mean of the participants' adapters.
std::vector<double> aggregate_adapters(std::span<const std::vector<double>> adapters,
                                       std::span<const double> data_sizes);

struct RoundOutcome {
  std::vector<int> participation;
  std::vector<Seconds> delay;  // Q_n; zero for unselected devices
  std::vector<Seconds> compute;
  std::vector<Seconds> transmission;
  std::vector<double> perplexity;
  std::vector<int> exchanges;  // chi this round
  std::vector<Bytes> payload_bytes;
  std::vector<Hertz> bandwidth;
  std::vector<Watts> power;
  std::vector<double> rate;
  Seconds server_delay = 0.0;
  Seconds max_delay = 0.0;  // over selected devices and the server
  std::vector<double> aggregated_adapter;
};

RoundOutcome run_round(World& world, const ActionBundle& actions, FederationMode mode);

/// Moves every device one mobility step and redraws its fading.
void advance_channels(World& world);

/// Redraws fading at the current positions.
void refresh_gains(World& world);

nlohmann::json round_to_json(const RoundOutcome& outcome, int round, FederationMode mode,
                             std::span<const int> exchange_counts);

}  // namespace peatsim::federation

#pragma once

// Downlink channel: random-waypoint mobility, log-distance path loss with
// Rician small-scale fading, Shannon rates and FDMA budget splitting.

#include <limits>
#include <span>
#include <vector>

#include "peatsim/common.hpp"
#include "peatsim/sim_core.hpp"

namespace peatsim::wireless {

/// dBm/Hz (or dBm) to W/Hz (or W).
double dbm_to_watts(double dbm);

struct ChannelParams {
  double noise_psd = 3.981071705534985e-21;  // -174 dBm/Hz
  Hertz bandwidth_budget = 20e9;
  Watts power_budget = 15.0;
  double pathloss_exponent = 3.5;
  double reference_distance = 1.0;
  double reference_loss_db = 40.0;
  double rician_k = 3.0;  // +inf disables fading

  void validate() const;
};

struct MobilityModel {
  double area_radius = 100.0;
  double speed_min = 0.5;
  double speed_max = 5.0;
  Seconds round_duration = 10.0;
  int waypoint_pause = 2;  // rounds spent at a waypoint before choosing the next
};

struct MobilityState {
  sim::Vec2 waypoint;
  double speed = 0.0;
  int pause_left = 0;
};

/// Uniform point in the disc of the given radius around the origin.
sim::Vec2 sample_in_disc(double radius, Rng& rng);

MobilityState init_mobility(const sim::Vec2& position, const MobilityModel& model, Rng& rng);

/// Advances one round along the current leg; the result always stays inside the disc.
sim::Vec2 step_mobility(const sim::Vec2& position, MobilityState& state,
                        const MobilityModel& model, Rng& rng);

/// Large-scale gain at `distance` (clamped to the reference distance).
double pathloss_linear(double distance, const ChannelParams& params);

/// |h|^2 for unit-mean-power Rician fading with factor k.
double rician_power(double k, Rng& rng);

double channel_gain(double distance, const ChannelParams& params, Rng& rng);

/// B log2(1 + gP / (B N0)) in bits/s.
double shannon_rate(Hertz bandwidth, Watts power, double gain, double noise_psd);

/// Downlink time for an emulator payload; zero unless selected and changed.
Seconds transmission_delay(bool selected, bool changed, Bytes emulator_bytes, double rate);

struct Allocation {
  std::vector<Hertz> bandwidth;
  std::vector<Watts> power;
};

/// Splits `budget` over the selected devices in proportion to their levels.
/// `levels` is indexed by device; unselected devices receive zero.
std::vector<double> allocate_budget(std::span<const int> levels, std::span<const int> selection,
                                    double budget);

Allocation allocate_budgets(std::span<const int> levels_bw, std::span<const int> levels_pw,
                            std::span<const int> selection, const ChannelParams& params);

}  // namespace peatsim::wireless

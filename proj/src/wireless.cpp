#include "peatsim/wireless.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace peatsim::wireless {

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

void ChannelParams::validate() const {
  if (!(noise_psd > 0.0)) throw DomainError("noise_psd must be positive");
  if (!(bandwidth_budget > 0.0) || !(power_budget > 0.0)) {
    throw DomainError("bandwidth and power budgets must be positive");
  }
  if (pathloss_exponent < 2.0 || pathloss_exponent > 6.0) {
    throw DomainError("pathloss_exponent must lie in [2, 6]");
  }
  if (!(reference_distance > 0.0)) throw DomainError("reference_distance must be positive");
  if (!(rician_k >= 0.0)) throw DomainError("rician_k must be non-negative");
}

sim::Vec2 sample_in_disc(double radius, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius * std::sqrt(unit(rng));
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  return {r * std::cos(theta), r * std::sin(theta)};
}

namespace {

double sample_speed(const MobilityModel& model, Rng& rng) {
  if (model.speed_max <= model.speed_min) return model.speed_min;
  return std::uniform_real_distribution<double>(model.speed_min, model.speed_max)(rng);
}

sim::Vec2 clamp_to_disc(sim::Vec2 p, double radius) {
  const double r = p.norm();
  if (r <= radius || r == 0.0) return p;
  const double s = radius / r;
  return {p.x * s, p.y * s};
}

}  // namespace

MobilityState init_mobility(const sim::Vec2& /*position*/, const MobilityModel& model, Rng& rng) {
  MobilityState state;
  state.waypoint = sample_in_disc(model.area_radius, rng);
  state.speed = sample_speed(model, rng);
  state.pause_left = 0;
  return state;
}

sim::Vec2 step_mobility(const sim::Vec2& position, MobilityState& state,
                        const MobilityModel& model, Rng& rng) {
  if (state.pause_left > 0) {
    --state.pause_left;
    return clamp_to_disc(position, model.area_radius);
  }
  const double step = state.speed * model.round_duration;
  const double dx = state.waypoint.x - position.x;
  const double dy = state.waypoint.y - position.y;
  const double dist = std::hypot(dx, dy);
  sim::Vec2 next;
  if (dist <= step) {
    next = state.waypoint;
    state.pause_left = model.waypoint_pause;
    state.waypoint = sample_in_disc(model.area_radius, rng);
    state.speed = sample_speed(model, rng);
  } else {
    next = {position.x + dx / dist * step, position.y + dy / dist * step};
  }
  return clamp_to_disc(next, model.area_radius);
}

double pathloss_linear(double distance, const ChannelParams& params) {
  const double d = std::max(distance, params.reference_distance);
  const double loss_db = params.reference_loss_db +
                         10.0 * params.pathloss_exponent * std::log10(d / params.reference_distance);
  return std::pow(10.0, -loss_db / 10.0);
}

double rician_power(double k, Rng& rng) {
  if (std::isinf(k)) return 1.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  const double los = std::sqrt(k / (k + 1.0));
  const double sigma = std::sqrt(1.0 / (2.0 * (k + 1.0)));
  const double re = los + sigma * normal(rng);
  const double im = sigma * normal(rng);
  return re * re + im * im;
}

double channel_gain(double distance, const ChannelParams& params, Rng& rng) {
  return pathloss_linear(distance, params) * rician_power(params.rician_k, rng);
}

double shannon_rate(Hertz bandwidth, Watts power, double gain, double noise_psd) {
  if (!(bandwidth > 0.0)) throw DomainError("bandwidth must be positive");
  return bandwidth * std::log2(1.0 + gain * power / (bandwidth * noise_psd));
}

Seconds transmission_delay(bool selected, bool changed, Bytes emulator_bytes, double rate) {
  if (!selected || !changed) return 0.0;
  if (!(rate > 0.0)) {
    throw InfeasibleRateError("emulator transfer scheduled over a zero-rate link");
  }
  return 8.0 * emulator_bytes / rate;
}

std::vector<double> allocate_budget(std::span<const int> levels, std::span<const int> selection,
                                    double budget) {
  if (selection.empty()) throw AllocationError("cannot allocate over an empty selection");
  std::vector<double> out(levels.size(), 0.0);
  double total = 0.0;
  for (int n : selection) {
    if (n < 0 || static_cast<std::size_t>(n) >= levels.size()) {
      throw AllocationError("selected device " + std::to_string(n) + " out of range");
    }
    if (levels[n] < 1) throw AllocationError("allocation levels start at 1");
    total += levels[n];
  }
  // Shares are snapped down to multiples of the budget's ulp. Every partial sum
  // is then exactly representable, so the remainder handed to the last selected
  // device makes the total equal the budget bit-exactly in any summation order.
  const double quantum = budget > 0.0 ? std::ldexp(1.0, std::ilogb(budget) - 52) : 0.0;
  double assigned = 0.0;
  for (std::size_t i = 0; i + 1 < selection.size(); ++i) {
    const int n = selection[i];
    const double share = budget * levels[n] / total;
    out[n] = quantum > 0.0 ? std::floor(share / quantum) * quantum : 0.0;
    assigned += out[n];
  }
  const double rest = budget - assigned;
  out[selection.back()] = rest;
  return out;
}

Allocation allocate_budgets(std::span<const int> levels_bw, std::span<const int> levels_pw,
                            std::span<const int> selection, const ChannelParams& params) {
  return {allocate_budget(levels_bw, selection, params.bandwidth_budget),
          allocate_budget(levels_pw, selection, params.power_budget)};
}

}  // namespace peatsim::wireless

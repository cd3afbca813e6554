#include "peatsim/federation.hpp"

#include <algorithm>
#include <cmath>

namespace peatsim::federation {

std::string to_string(FederationMode mode) {
  switch (mode) {
    case FederationMode::kFedPEAT:
      return "fedpeat";
    case FederationMode::kFedPEFT:
      return "fedpeft";
    case FederationMode::kFedFT:
      return "fedft";
  }
  return "unknown";
}

FederationMode parse_mode(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "fedpeat") return FederationMode::kFedPEAT;
  if (lower == "fedpeft") return FederationMode::kFedPEFT;
  if (lower == "fedft") return FederationMode::kFedFT;
  throw ConfigError("unknown federation mode '" + std::string(text) + "'");
}

namespace {

// What the device actually trains on top of the shipped payload.
sim::AdapterSpec trainable_adapter(const sim::AdapterSpec& adapter, FederationMode mode) {
  if (mode != FederationMode::kFedFT) return adapter;
  sim::AdapterSpec none;
  none.layer_count = 0;
  return none;  // the full model already contains the adapter layers
}

}  // namespace

std::vector<Dissemination> disseminate(std::span<Device> devices, const sim::ModelSpec& model,
                                       const sim::AdapterSpec& adapter,
                                       std::span<const int> selection,
                                       std::span<const double> retentions, FederationMode mode) {
  if (mode == FederationMode::kFedPEAT && retentions.size() != selection.size()) {
    throw DimensionError("one retention per selected device is required");
  }
  std::vector<Dissemination> out;
  out.reserve(selection.size());
  for (std::size_t k = 0; k < selection.size(); ++k) {
    Device& dev = devices[selection[k]];
    Dissemination d;
    d.device = selection[k];
    switch (mode) {
      case FederationMode::kFedFT:
        d.emulator = sim::full_model_payload(model);
        d.changed = true;
        d.exchanged = false;
        dev.state.current_retention = 1.0;
        dev.state.memory_used = model.total_bytes;
        break;
      case FederationMode::kFedPEFT:
      case FederationMode::kFedPEAT: {
        const double retention = mode == FederationMode::kFedPEFT ? 1.0 : retentions[k];
        d.emulator = sim::emulator_from_retention(model, adapter, retention);
        d.changed = !dev.state.current_retention || *dev.state.current_retention != retention;
        d.exchanged = d.changed;
        dev.state.current_retention = retention;
        dev.state.memory_used = sim::memory_footprint(d.emulator, adapter);
        break;
      }
    }
    if (d.exchanged) ++dev.state.exchange_count;
    out.push_back(d);
  }
  return out;
}

TuningResult local_tuning(const Device& device, const sim::EmulatorSpec& emulator,
                          std::vector<double> adapter, const sim::PerplexitySurrogate& surrogate,
                          const TuningParams& params, Rng& rng) {
  TuningResult result;
  result.perplexity = device.state.perplexity;
  if (params.epochs <= 0) {
    result.adapter = std::move(adapter);
    return result;
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = 0; i < adapter.size(); ++i) {
      const double pull = params.adapter_step * (device.adapter_optimum[i] - adapter[i]);
      const double jitter = params.adapter_noise > 0.0 ? params.adapter_noise * noise(rng) : 0.0;
      adapter[i] += pull + jitter;
    }
  }
  result.adapter = std::move(adapter);
  const double target = sim::final_perplexity(surrogate, emulator.retention);
  result.perplexity = sim::perplexity_step(device.state.perplexity, true, target,
                                           surrogate.convergence_rate);
  return result;
}

std::vector<double> aggregate_adapters(std::span<const std::vector<double>> adapters,
                                       std::span<const double> data_sizes) {
  if (adapters.empty() || adapters.size() != data_sizes.size()) {
    throw AggregationError("need one data size per adapter and at least one adapter");
  }
  const std::size_t dim = adapters.front().size();
  double total = 0.0;
  for (std::size_t n = 0; n < adapters.size(); ++n) {
    if (adapters[n].size() != dim) throw AggregationError("adapter dimension mismatch");
    if (data_sizes[n] < 0.0) throw AggregationError("negative data size");
    total += data_sizes[n];
  }
  if (!(total > 0.0)) throw AggregationError("total data size must be positive");
  std::vector<double> out(dim, 0.0);
  for (std::size_t n = 0; n < adapters.size(); ++n) {
    for (std::size_t i = 0; i < dim; ++i) out[i] += data_sizes[n] * adapters[n][i];
  }
  for (double& v : out) v /= total;
  return out;
}

RoundOutcome run_round(World& world, const ActionBundle& actions, FederationMode mode) {
  const std::size_t n_dev = world.devices.size();
  const auto& sel = actions.selection;
  if (actions.bandwidth_levels.size() != sel.size() || actions.power_levels.size() != sel.size()) {
    throw DimensionError("bandwidth/power levels must follow the selection");
  }
  RoundOutcome out;
  out.participation = sel;
  out.delay.assign(n_dev, 0.0);
  out.compute.assign(n_dev, 0.0);
  out.transmission.assign(n_dev, 0.0);
  out.exchanges.assign(n_dev, 0);
  out.payload_bytes.assign(n_dev, 0.0);
  out.bandwidth.assign(n_dev, 0.0);
  out.power.assign(n_dev, 0.0);
  out.rate.assign(n_dev, 0.0);

  if (!sel.empty()) {
    std::vector<int> bw(n_dev, 1), pw(n_dev, 1);
    for (std::size_t k = 0; k < sel.size(); ++k) {
      bw[sel[k]] = actions.bandwidth_levels[k];
      pw[sel[k]] = actions.power_levels[k];
    }
    auto alloc = wireless::allocate_budgets(bw, pw, sel, world.channel);
    out.bandwidth = std::move(alloc.bandwidth);
    out.power = std::move(alloc.power);
  }

  const auto diss = disseminate(world.devices, world.model, world.adapter, sel,
                                actions.retentions, mode);
  const sim::AdapterSpec trainable = trainable_adapter(world.adapter, mode);

  std::vector<std::vector<double>> local;
  std::vector<double> weights;
  local.reserve(sel.size() + 1);
  weights.reserve(sel.size() + 1);

  for (const auto& d : diss) {
    Device& dev = world.devices[d.device];
    const int n = d.device;
    out.rate[n] = wireless::shannon_rate(out.bandwidth[n], out.power[n], dev.gain,
                                         world.channel.noise_psd);
    out.transmission[n] = wireless::transmission_delay(true, d.changed, d.emulator.bytes, out.rate[n]);
    out.compute[n] = sim::compute_delay(dev.profile, d.emulator, trainable, world.tuning.epochs);
    out.delay[n] = out.compute[n] + out.transmission[n];
    out.exchanges[n] = d.exchanged ? 1 : 0;
    out.payload_bytes[n] = d.changed ? d.emulator.bytes : 0.0;

    auto tuned = local_tuning(dev, d.emulator, world.adapter.weights, world.surrogate,
                              world.tuning, world.tuning_rng);
    dev.state.perplexity = tuned.perplexity;
    local.push_back(std::move(tuned.adapter));
    weights.push_back(dev.profile.data_size);
  }

  // The server holds the full model: no transfer, full-size compute.
  {
    Device& srv = world.server;
    const sim::EmulatorSpec backbone = sim::full_model_payload(world.model);
    sim::AdapterSpec none;
    out.server_delay = sim::compute_delay(srv.profile, backbone, none, world.tuning.epochs);
    auto tuned = local_tuning(srv, backbone, world.adapter.weights, world.surrogate, world.tuning,
                              world.tuning_rng);
    srv.state.perplexity = tuned.perplexity;
    local.push_back(std::move(tuned.adapter));
    weights.push_back(srv.profile.data_size);
  }

  out.aggregated_adapter = aggregate_adapters(local, weights);
  world.adapter.weights = out.aggregated_adapter;

  out.max_delay = out.server_delay;
  for (int n : sel) out.max_delay = std::max(out.max_delay, out.delay[n]);

  out.perplexity.resize(n_dev);
  for (std::size_t n = 0; n < n_dev; ++n) out.perplexity[n] = world.devices[n].state.perplexity;
  ++world.round;
  return out;
}

void refresh_gains(World& world) {
  for (auto& dev : world.devices) {
    dev.gain = wireless::channel_gain(dev.state.position.norm(), world.channel, world.fading_rng);
  }
}

void advance_channels(World& world) {
  for (auto& dev : world.devices) {
    dev.state.position =
        wireless::step_mobility(dev.state.position, dev.mobility, world.mobility, world.mobility_rng);
  }
  refresh_gains(world);
}

nlohmann::json round_to_json(const RoundOutcome& outcome, int round, FederationMode mode,
                             std::span<const int> exchange_counts) {
  nlohmann::json row;
  row["round"] = round;
  row["mode"] = to_string(mode);
  row["selection"] = outcome.participation;
  row["delay"] = outcome.delay;
  row["compute"] = outcome.compute;
  row["transmission"] = outcome.transmission;
  row["server_delay"] = outcome.server_delay;
  row["max_delay"] = outcome.max_delay;
  row["perplexity"] = outcome.perplexity;
  row["exchanges"] = outcome.exchanges;
  row["exchange_counts"] = std::vector<int>(exchange_counts.begin(), exchange_counts.end());
  row["payload_bytes"] = outcome.payload_bytes;
  row["bandwidth"] = outcome.bandwidth;
  row["power"] = outcome.power;
  return row;
}

}  // namespace peatsim::federation

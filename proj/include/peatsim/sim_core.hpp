#pragma once

// Analytic stand-ins for the foundation model, its emulator/adapter split,
// perplexity, local compute time and memory.

#include <optional>
#include <vector>

#include "peatsim/common.hpp"

namespace peatsim::sim {

struct ModelSpec {
  double total_params = 1.208e9;
  Bytes total_bytes = 2.63 * kGigabyte;
  int layer_count = 24;
  int adapter_top_layers = 2;
  int adapter_bottom_layers = 2;

  int adapter_layers() const { return adapter_top_layers + adapter_bottom_layers; }
  int droppable_layers() const { return layer_count - adapter_layers(); }
  Bytes bytes_per_layer() const { return total_bytes / layer_count; }
  double params_per_layer() const { return total_params / layer_count; }

  /// Throws DomainError if the layer split or sizes are inconsistent.
  void validate() const;
};

struct AdapterSpec {
  int layer_count = 0;
  double params = 0.0;
  Bytes bytes = 0.0;
  std::vector<double> weights;  // synthetic values, aggregated across devices
};

AdapterSpec make_adapter(const ModelSpec& model, std::size_t weight_dim = 64);

struct EmulatorSpec {
  double retention = 1.0;
  int layer_count = 0;
  double params = 0.0;
  Bytes bytes = 0.0;
};

/// Layer-dropped emulator keeping round(retention * droppable) layers (at least one).
EmulatorSpec emulator_from_retention(const ModelSpec& model, const AdapterSpec& adapter,
                                     double retention);

/// The whole model shipped as the "emulator" when no split is used.
EmulatorSpec full_model_payload(const ModelSpec& model);

struct PerplexitySurrogate {
  double a = 25.2;
  double b = -43.1;
  double c = 31.9;
  double lora_delta = -0.78;
  double p_init = 31.9;
  double convergence_rate = 0.08;

  /// Quadratic fit only, without the adapter improvement.
  double base_perplexity(double retention) const;
};

/// Converged perplexity reachable with an emulator of the given retention.
double final_perplexity(const PerplexitySurrogate& s, double retention);

/// One participation round of exponential approach toward `target`.
/// A device whose target rose above its current value jumps to the target.
double perplexity_step(double perplexity, bool participated, double target, double rate);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  double norm() const;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct DeviceProfile {
  int id = 0;
  Bytes memory_capacity = 0.0;
  double compute_speed = 0.0;  // parameter-samples processed per second
  double data_size = 0.0;      // samples
  bool is_server = false;
};

struct DeviceState {
  Vec2 position;
  std::optional<double> current_retention;
  double perplexity = 0.0;
  int exchange_count = 0;
  Bytes memory_used = 0.0;
};

Seconds compute_delay(const DeviceProfile& profile, const EmulatorSpec& emulator,
                      const AdapterSpec& adapter, int epochs);

Bytes memory_footprint(const EmulatorSpec& emulator, const AdapterSpec& adapter);

}  // namespace peatsim::sim

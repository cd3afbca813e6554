#include "peatsim/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace peatsim::sim {

namespace {

void check_retention(double retention) {
  if (!(retention > 0.0 && retention <= 1.0)) {
    throw DomainError("retention must lie in (0, 1], got " + std::to_string(retention));
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (total_params <= 0.0 || total_bytes <= 0.0) {
    throw DomainError("model size must be positive");
  }
  if (adapter_top_layers < 0 || adapter_bottom_layers < 0 || adapter_layers() >= layer_count) {
    throw DomainError("adapter layers must leave at least one droppable layer");
  }
}

AdapterSpec make_adapter(const ModelSpec& model, std::size_t weight_dim) {
  model.validate();
  AdapterSpec adapter;
  adapter.layer_count = model.adapter_layers();
  adapter.params = adapter.layer_count * model.params_per_layer();
  adapter.bytes = std::round(adapter.layer_count * model.bytes_per_layer());
  adapter.weights.assign(weight_dim, 0.0);
  return adapter;
}

EmulatorSpec emulator_from_retention(const ModelSpec& model, const AdapterSpec& adapter,
                                     double retention) {
  check_retention(retention);
  const int droppable = model.layer_count - adapter.layer_count;
  EmulatorSpec e;
  e.retention = retention;
  e.layer_count = std::max(1, static_cast<int>(std::lround(retention * droppable)));
  e.params = e.layer_count * model.params_per_layer();
  e.bytes = e.layer_count * model.bytes_per_layer();
  return e;
}

EmulatorSpec full_model_payload(const ModelSpec& model) {
  return EmulatorSpec{1.0, model.layer_count, model.total_params, model.total_bytes};
}

double PerplexitySurrogate::base_perplexity(double retention) const {
  check_retention(retention);
  return (a * retention + b) * retention + c;
}

double final_perplexity(const PerplexitySurrogate& s, double retention) {
  return s.base_perplexity(retention) + s.lora_delta;
}

double perplexity_step(double perplexity, bool participated, double target, double rate) {
  if (!participated) return perplexity;
  const double next = target + (perplexity - target) * (1.0 - rate);
  return std::max(next, target);
}

double Vec2::norm() const { return std::hypot(x, y); }

Seconds compute_delay(const DeviceProfile& profile, const EmulatorSpec& emulator,
                      const AdapterSpec& adapter, int epochs) {
  return epochs * profile.data_size * (emulator.params + adapter.params) / profile.compute_speed;
}

Bytes memory_footprint(const EmulatorSpec& emulator, const AdapterSpec& adapter) {
  return emulator.bytes + adapter.bytes;
}

}  // namespace peatsim::sim

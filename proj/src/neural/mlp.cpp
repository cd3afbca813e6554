#include <cmath>
#include <string>

#include "peatsim/neural.hpp"

namespace peatsim::neural {

Mlp::Mlp(std::vector<int> layer_sizes, bool activate_output, Rng& rng, double output_scale)
    : sizes_(std::move(layer_sizes)), activate_output_(activate_output) {
  if (sizes_.size() < 2) throw DimensionError("an MLP needs at least input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw DimensionError("layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    const double scale = (l + 2 == sizes_.size()) ? output_scale : 1.0;
    std::uniform_real_distribution<double> dist(-limit, limit);
    double* w = params_.data() + offsets_[l];
    for (std::size_t i = 0; i < static_cast<std::size_t>(in) * out; ++i) w[i] = scale * dist(rng);
  }
}

namespace {

void affine(const double* w, const double* b, std::span<const double> x, int out, double* y) {
  const std::size_t in = x.size();
  for (int i = 0; i < out; ++i) {
    const double* row = w + static_cast<std::size_t>(i) * in;
    double acc = b[i];
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

}  // namespace

Vector Mlp::forward(std::span<const double> x) const {
  Cache cache;
  return forward(x, cache);
}

const Vector& Mlp::forward(std::span<const double> x, Cache& cache) const {
  if (static_cast<int>(x.size()) != sizes_.front()) {
    throw DimensionError("MLP input has size " + std::to_string(x.size()) + ", expected " +
                         std::to_string(sizes_.front()));
  }
  const std::size_t layers = sizes_.size() - 1;
  cache.activations.resize(layers + 1);
  cache.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + static_cast<std::size_t>(in) * out;
    Vector& y = cache.activations[l + 1];
    y.resize(static_cast<std::size_t>(out));
    affine(w, b, cache.activations[l], out, y.data());
    if (l + 1 < layers || activate_output_) {
      for (double& v : y) v = std::tanh(v);
    }
  }
  return cache.activations.back();
}

void Mlp::backward(const Cache& cache, std::span<const double> upstream, std::span<double> grads,
                   Vector* input_grad) const {
  const std::size_t layers = sizes_.size() - 1;
  if (static_cast<int>(upstream.size()) != sizes_.back()) {
    throw DimensionError("upstream gradient size mismatch");
  }
  if (grads.size() != params_.size()) throw DimensionError("gradient buffer size mismatch");
  Vector delta(upstream.begin(), upstream.end());
  Vector prev;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const Vector& a_out = cache.activations[l + 1];
    const Vector& a_in = cache.activations[l];
    if (l + 1 < layers || activate_output_) {
      for (int i = 0; i < out; ++i) delta[i] *= 1.0 - a_out[i] * a_out[i];
    }
    const double* w = params_.data() + offsets_[l];
    double* gw = grads.data() + offsets_[l];
    double* gb = gw + static_cast<std::size_t>(in) * out;
    for (int i = 0; i < out; ++i) {
      const double d = delta[i];
      gb[i] += d;
      if (d == 0.0) continue;
      double* grow = gw + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) grow[j] += d * a_in[j];
    }
    if (l > 0 || input_grad != nullptr) {
      prev.assign(static_cast<std::size_t>(in), 0.0);
      for (int i = 0; i < out; ++i) {
        const double d = delta[i];
        if (d == 0.0) continue;
        const double* row = w + static_cast<std::size_t>(i) * in;
        for (int j = 0; j < in; ++j) prev[j] += row[j] * d;
      }
      delta.swap(prev);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adam_step shape mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace peatsim::neural

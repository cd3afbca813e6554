#pragma once

// Small dense networks with hand-written backprop, Adam, and the discrete
// distributions used by the policy heads.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "peatsim/common.hpp"

namespace peatsim::neural {

using Vector = std::vector<double>;

/// Fully connected network, tanh on hidden layers (and optionally the output).
///
/// Parameters live in one flat buffer, layer by layer: the weight matrix
/// (out x in, row-major) followed by the bias vector (out).
class Mlp {
 public:
  struct Cache {
    std::vector<Vector> activations;  // [0] is the input, [l + 1] the output of layer l
  };

  Mlp() = default;
  /// Xavier-uniform weights, zero biases; the last layer's weights are scaled by `output_scale`.
  Mlp(std::vector<int> layer_sizes, bool activate_output, Rng& rng, double output_scale = 1.0);

  Vector forward(std::span<const double> x) const;
  const Vector& forward(std::span<const double> x, Cache& cache) const;

  /// Accumulates dL/dparams into `grads`; writes dL/dx into `input_grad` when given.
  void backward(const Cache& cache, std::span<const double> upstream, std::span<double> grads,
                Vector* input_grad = nullptr) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  bool activate_output() const { return activate_output_; }

 private:
  std::vector<int> sizes_;
  bool activate_output_ = false;
  Vector params_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
};

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t size, double learning_rate)
      : m(size, 0.0), v(size, 0.0), lr(learning_rate) {}
};

/// Bias-corrected Adam; descends along `grads`.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// --- categorical -----------------------------------------------------------

double log_sum_exp(std::span<const double> logits);
Vector softmax(std::span<const double> logits);

struct CategoricalDraw {
  int index = 0;
  double log_prob = 0.0;
};

CategoricalDraw categorical_sample(std::span<const double> logits, Rng& rng);
int argmax(std::span<const double> logits);
double categorical_log_prob(std::span<const double> logits, int index);
double categorical_entropy(std::span<const double> logits);
/// out += scale * d log p(index) / d logits
void categorical_log_prob_grad(std::span<const double> logits, int index, double scale,
                               std::span<double> out);
/// out += scale * d H / d logits
void categorical_entropy_grad(std::span<const double> logits, double scale, std::span<double> out);

// --- Plackett-Luce (ordered top-K without replacement) -------------------

struct RankingDraw {
  std::vector<int> order;
  double log_prob = 0.0;
};

RankingDraw plackett_luce_sample(std::span<const double> logits, int k, Rng& rng);
/// Highest-logit items first, ties broken by index.
std::vector<int> plackett_luce_greedy(std::span<const double> logits, int k);
double plackett_luce_log_prob(std::span<const double> logits, std::span<const int> order);
void plackett_luce_log_prob_grad(std::span<const double> logits, std::span<const int> order,
                                 double scale, std::span<double> out);
/// Sum of the conditional entropies met along `order`.
double plackett_luce_entropy(std::span<const double> logits, std::span<const int> order);
void plackett_luce_entropy_grad(std::span<const double> logits, std::span<const int> order,
                                double scale, std::span<double> out);

// --- checkpoints -----------------------------------------------------------

/// Named flat tensors written as concatenated little-endian doubles plus a JSON
/// manifest listing, in file order, each tensor's name, shape, offset and count.
class ParameterArchive {
 public:
  struct Entry {
    std::vector<std::int64_t> shape;
    Vector values;
  };

  void put(const std::string& name, std::vector<std::int64_t> shape, std::span<const double> values);
  void put(const std::string& name, const Mlp& net);
  void put_text(const std::string& name, std::string value);

  const Entry& get(const std::string& name) const;
  void get_into(const std::string& name, std::span<double> out) const;
  void get_into(const std::string& name, Mlp& net) const;
  const std::string& text(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  /// Writes `<stem>.bin` and `<stem>.json`.
  void save(const std::filesystem::path& stem) const;
  static ParameterArchive load(const std::filesystem::path& stem);

 private:
  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
  std::map<std::string, std::string> texts_;
};

}  // namespace peatsim::neural

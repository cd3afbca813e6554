#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "peatsim/neural.hpp"

namespace peatsim::neural {

double log_sum_exp(std::span<const double> logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double z : logits) acc += std::exp(z - hi);
  return hi + std::log(acc);
}

Vector softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  Vector p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

namespace {

int draw_index(std::span<const double> probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  // u landed in the rounding gap above the cumulative sum: take the last non-zero entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Logits of the items still available, in `remaining` order.
Vector gather(std::span<const double> logits, const std::vector<int>& remaining) {
  Vector z(remaining.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) z[i] = logits[remaining[i]];
  return z;
}

std::vector<int> all_items(std::size_t n) {
  std::vector<int> items(n);
  std::iota(items.begin(), items.end(), 0);
  return items;
}

void check_order(std::span<const double> logits, std::span<const int> order) {
  if (order.size() > logits.size()) throw DimensionError("ranking longer than the item set");
  std::vector<bool> seen(logits.size(), false);
  for (int i : order) {
    if (i < 0 || static_cast<std::size_t>(i) >= logits.size() || seen[i]) {
      throw DimensionError("ranking must hold distinct in-range items");
    }
    seen[i] = true;
  }
}

void remove_item(std::vector<int>& remaining, int item) {
  remaining.erase(std::find(remaining.begin(), remaining.end(), item));
}

}  // namespace

CategoricalDraw categorical_sample(std::span<const double> logits, Rng& rng) {
  const Vector p = softmax(logits);
  const int idx = draw_index(p, rng);
  return {idx, categorical_log_prob(logits, idx)};
}

int argmax(std::span<const double> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double categorical_log_prob(std::span<const double> logits, int index) {
  return logits[index] - log_sum_exp(logits);
}

double categorical_entropy(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  double h = 0.0;
  for (double z : logits) {
    const double lp = z - lse;
    h -= std::exp(lp) * lp;
  }
  return h;
}

void categorical_log_prob_grad(std::span<const double> logits, int index, double scale,
                               std::span<double> out) {
  const Vector p = softmax(logits);
  for (std::size_t i = 0; i < p.size(); ++i) out[i] -= scale * p[i];
  out[index] += scale;
}

void categorical_entropy_grad(std::span<const double> logits, double scale, std::span<double> out) {
  const double lse = log_sum_exp(logits);
  const double h = categorical_entropy(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double lp = logits[i] - lse;
    out[i] -= scale * std::exp(lp) * (lp + h);
  }
}

RankingDraw plackett_luce_sample(std::span<const double> logits, int k, Rng& rng) {
  if (k < 0 || static_cast<std::size_t>(k) > logits.size()) {
    throw DimensionError("cannot draw more items than available");
  }
  RankingDraw draw;
  std::vector<int> remaining = all_items(logits.size());
  for (int step = 0; step < k; ++step) {
    const Vector z = gather(logits, remaining);
    const Vector p = softmax(z);
    const int pos = draw_index(p, rng);
    draw.log_prob += z[pos] - log_sum_exp(z);
    draw.order.push_back(remaining[pos]);
    remaining.erase(remaining.begin() + pos);
  }
  return draw;
}

std::vector<int> plackett_luce_greedy(std::span<const double> logits, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > logits.size()) {
    throw DimensionError("cannot draw more items than available");
  }
  std::vector<int> items = all_items(logits.size());
  std::stable_sort(items.begin(), items.end(),
                   [&](int a, int b) { return logits[a] > logits[b]; });
  items.resize(static_cast<std::size_t>(k));
  return items;
}

double plackett_luce_log_prob(std::span<const double> logits, std::span<const int> order) {
  check_order(logits, order);
  std::vector<int> remaining = all_items(logits.size());
  double lp = 0.0;
  for (int item : order) {
    lp += logits[item] - log_sum_exp(gather(logits, remaining));
    remove_item(remaining, item);
  }
  return lp;
}

void plackett_luce_log_prob_grad(std::span<const double> logits, std::span<const int> order,
                                 double scale, std::span<double> out) {
  check_order(logits, order);
  std::vector<int> remaining = all_items(logits.size());
  for (int item : order) {
    const Vector p = softmax(gather(logits, remaining));
    for (std::size_t i = 0; i < remaining.size(); ++i) out[remaining[i]] -= scale * p[i];
    out[item] += scale;
    remove_item(remaining, item);
  }
}

double plackett_luce_entropy(std::span<const double> logits, std::span<const int> order) {
  check_order(logits, order);
  std::vector<int> remaining = all_items(logits.size());
  double h = 0.0;
  for (int item : order) {
    h += categorical_entropy(gather(logits, remaining));
    remove_item(remaining, item);
  }
  return h;
}

void plackett_luce_entropy_grad(std::span<const double> logits, std::span<const int> order,
                                double scale, std::span<double> out) {
  check_order(logits, order);
  std::vector<int> remaining = all_items(logits.size());
  for (int item : order) {
    const Vector z = gather(logits, remaining);
    Vector g(z.size(), 0.0);
    categorical_entropy_grad(z, scale, g);
    for (std::size_t i = 0; i < remaining.size(); ++i) out[remaining[i]] += g[i];
    remove_item(remaining, item);
  }
}

}  // namespace peatsim::neural

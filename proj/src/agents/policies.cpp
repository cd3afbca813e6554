#include <cmath>
#include <numeric>

#include "peatsim/agents.hpp"

namespace peatsim::agents {

Decision RandomPolicy::act(std::span<const double> observation, Rng& rng, bool /*greedy*/) {
  Decision d;
  d.actions.groups.resize(specs_.size());
  d.branch_log_probs.assign(specs_.size(), 0.0);
  for (std::size_t b = 0; b < specs_.size(); ++b) {
    const BranchSpec& spec = specs_[b];
    auto& group = d.actions.groups[b];
    if (spec.kind == BranchSpec::Kind::kSelection) {
      std::vector<int> pool(static_cast<std::size_t>(spec.num_devices));
      std::iota(pool.begin(), pool.end(), 0);
      for (int k = 0; k < spec.select_k; ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        const std::size_t i = pick(rng);
        d.branch_log_probs[b] -= std::log(static_cast<double>(pool.size()));
        group.push_back(pool[i]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
      }
    } else {
      std::uniform_int_distribution<int> pick(0, spec.choices - 1);
      for (std::size_t k = 0; k < d.actions.selection().size(); ++k) {
        group.push_back(pick(rng));
        d.branch_log_probs[b] -= std::log(static_cast<double>(spec.choices));
      }
    }
  }
  d.joint_log_prob = std::accumulate(d.branch_log_probs.begin(), d.branch_log_probs.end(), 0.0);
  d.chained_inputs = chained_states(observation, specs_, d.actions);
  return d;
}

Decision FixedPolicy::act(std::span<const double> observation, Rng& /*rng*/, bool /*greedy*/) {
  if (observation.empty()) throw DimensionError("fixed policy needs the round feature");
  const long round = std::lround(observation.back() * rounds_);
  Decision d;
  d.actions.groups.resize(specs_.size());
  d.branch_log_probs.assign(specs_.size(), 0.0);
  for (std::size_t b = 0; b < specs_.size(); ++b) {
    const BranchSpec& spec = specs_[b];
    auto& group = d.actions.groups[b];
    if (spec.kind == BranchSpec::Kind::kSelection) {
      for (int k = 0; k < spec.select_k; ++k) {
        group.push_back(static_cast<int>((round * spec.select_k + k) % spec.num_devices));
      }
    } else {
      group.assign(d.actions.selection().size(), spec.choices - 1);
    }
  }
  d.chained_inputs = chained_states(observation, specs_, d.actions);
  return d;
}

}  // namespace peatsim::agents

#include <algorithm>

#include "peatsim/agents.hpp"

namespace peatsim::agents {

namespace {

std::span<const double> device_logits(const BranchSpec& spec, std::span<const double> logits,
                                      int device) {
  return logits.subspan(static_cast<std::size_t>(device) * spec.choices,
                        static_cast<std::size_t>(spec.choices));
}

std::span<double> device_slice(const BranchSpec& spec, std::span<double> out, int device) {
  return out.subspan(static_cast<std::size_t>(device) * spec.choices,
                     static_cast<std::size_t>(spec.choices));
}

void check_logits(const BranchSpec& spec, std::span<const double> logits) {
  if (static_cast<int>(logits.size()) != spec.logit_count()) {
    throw DimensionError("branch '" + spec.name + "' expects " +
                         std::to_string(spec.logit_count()) + " logits");
  }
}

void check_choice(const BranchSpec& spec, std::span<const int> choice,
                  std::span<const int> selection) {
  if (choice.size() != selection.size()) {
    throw DimensionError("branch '" + spec.name + "' needs one choice per selected device");
  }
  for (int c : choice) {
    if (c < 0 || c >= spec.choices) throw DimensionError("choice index out of range");
  }
}

}  // namespace

BranchDraw sample_branch(const BranchSpec& spec, std::span<const double> logits,
                         std::span<const int> selection, Rng* rng, bool greedy) {
  check_logits(spec, logits);
  BranchDraw draw;
  if (spec.kind == BranchSpec::Kind::kSelection) {
    if (greedy) {
      draw.choice = neural::plackett_luce_greedy(logits, spec.select_k);
      draw.log_prob = neural::plackett_luce_log_prob(logits, draw.choice);
    } else {
      auto r = neural::plackett_luce_sample(logits, spec.select_k, *rng);
      draw.choice = std::move(r.order);
      draw.log_prob = r.log_prob;
    }
    return draw;
  }
  for (int n : selection) {
    const auto z = device_logits(spec, logits, n);
    if (greedy) {
      const int idx = neural::argmax(z);
      draw.choice.push_back(idx);
      draw.log_prob += neural::categorical_log_prob(z, idx);
    } else {
      const auto c = neural::categorical_sample(z, *rng);
      draw.choice.push_back(c.index);
      draw.log_prob += c.log_prob;
    }
  }
  return draw;
}

double branch_log_prob(const BranchSpec& spec, std::span<const double> logits,
                       std::span<const int> choice, std::span<const int> selection) {
  check_logits(spec, logits);
  if (spec.kind == BranchSpec::Kind::kSelection) {
    return neural::plackett_luce_log_prob(logits, choice);
  }
  check_choice(spec, choice, selection);
  double lp = 0.0;
  for (std::size_t k = 0; k < selection.size(); ++k) {
    lp += neural::categorical_log_prob(device_logits(spec, logits, selection[k]), choice[k]);
  }
  return lp;
}

double branch_entropy(const BranchSpec& spec, std::span<const double> logits,
                      std::span<const int> choice, std::span<const int> selection) {
  check_logits(spec, logits);
  if (spec.kind == BranchSpec::Kind::kSelection) {
    return neural::plackett_luce_entropy(logits, choice);
  }
  double h = 0.0;
  for (int n : selection) h += neural::categorical_entropy(device_logits(spec, logits, n));
  return h;
}

void branch_gradient(const BranchSpec& spec, std::span<const double> logits,
                     std::span<const int> choice, std::span<const int> selection,
                     double logp_scale, double entropy_scale, std::span<double> out) {
  check_logits(spec, logits);
  if (spec.kind == BranchSpec::Kind::kSelection) {
    neural::plackett_luce_log_prob_grad(logits, choice, logp_scale, out);
    neural::plackett_luce_entropy_grad(logits, choice, entropy_scale, out);
    return;
  }
  check_choice(spec, choice, selection);
  for (std::size_t k = 0; k < selection.size(); ++k) {
    const auto z = device_logits(spec, logits, selection[k]);
    auto g = device_slice(spec, out, selection[k]);
    neural::categorical_log_prob_grad(z, choice[k], logp_scale, g);
    neural::categorical_entropy_grad(z, entropy_scale, g);
  }
}

std::vector<std::vector<double>> chained_states(std::span<const double> observation,
                                                std::span<const BranchSpec> specs,
                                                const BranchActions& actions) {
  std::vector<std::vector<double>> states;
  std::vector<double> s(observation.begin(), observation.end());
  for (std::size_t b = 0; b < specs.size(); ++b) {
    states.push_back(s);
    const int width = specs[b].encoding_size();
    if (width == 0 || b + 1 == specs.size()) continue;
    const std::size_t at = s.size();
    s.resize(at + static_cast<std::size_t>(width));
    encode_branch(specs[b], actions.groups.at(b), actions.selection(),
                  std::span<double>(s).subspan(at));
  }
  return states;
}

}  // namespace peatsim::agents

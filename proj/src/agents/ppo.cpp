#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "peatsim/agents.hpp"

namespace peatsim::agents {

void PpoConfig::validate() const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("clip_epsilon must be in (0,1)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0,1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0,1]");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be at least 1");
  if (segment_length < 1) throw ConfigError("segment_length must be at least 1");
  if (target_sync_interval < 1) throw ConfigError("target_sync_interval must be at least 1");
  if (entropy_coef < 0.0) throw ConfigError("entropy_coef must be non-negative");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (hidden.empty()) throw ConfigError("hidden must list at least one layer");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
  }
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const double> next_values, const std::vector<bool>& dones,
                        double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || dones.size() != n) {
    throw DimensionError("gae inputs must have equal length");
  }
  std::vector<double> adv(n, 0.0);
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_values[t] * live - values[t];
    acc = delta + gamma * lambda * live * acc;
    adv[t] = acc;
  }
  return adv;
}

namespace {

std::vector<int> critic_layer_sizes(int obs_dim, const std::vector<int>& hidden) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

void normalize(std::vector<double>& x) {
  if (x.empty()) return;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  // A batch with no spread carries no ranking signal; leave it unnormalized.
  if (sd < 1e-12) return;
  for (double& v : x) v = (v - mean) / (sd + 1e-8);
}

}  // namespace

PpoAgent::PpoAgent(std::string name, int obs_dim, std::vector<BranchSpec> specs, Layout layout,
                   PpoConfig config, std::uint64_t seed)
    : name_(std::move(name)),
      specs_(std::move(specs)),
      layout_(std::move(layout)),
      config_(std::move(config)),
      shuffle_rng_(make_stream(seed, streams::kShuffle)) {
  config_.validate();
  if (layout_.actor_branches.empty()) throw ConfigError("layout needs at least one actor");
  if (layout_.actor_critic.size() != layout_.actor_branches.size()) {
    throw ConfigError("layout must name a critic for every actor");
  }
  if (layout_.critic_count < 1) throw ConfigError("layout needs at least one critic");
  // Actors sample in order, so branch ownership must walk the branches in order:
  // the selection is always drawn before any per-device branch reads it.
  int expected = 0;
  for (const auto& owned : layout_.actor_branches) {
    for (int b : owned) {
      if (b != expected++) throw ConfigError("actors must own consecutive branches in order");
    }
  }
  if (expected != static_cast<int>(specs_.size())) throw ConfigError("every branch needs an actor");
  for (int c : layout_.actor_critic) {
    if (c < 0 || c >= layout_.critic_count) throw ConfigError("actor critic index out of range");
  }

  Rng init = make_stream(seed, streams::kInit);
  for (const auto& owned : layout_.actor_branches) {
    actors_.emplace_back(obs_dim, specs_, owned, layout_.chained, config_.hidden, init);
    auto& opts = actor_opt_.emplace_back();
    for (const auto* net : std::as_const(actors_.back()).networks()) {
      opts.emplace_back(net->parameter_count(), config_.actor_lr);
    }
  }
  for (int c = 0; c < layout_.critic_count; ++c) {
    critics_.emplace_back(critic_layer_sizes(obs_dim, config_.hidden), false, init);
    critic_opt_.emplace_back(critics_.back().parameter_count(), config_.critic_lr);
  }
  targets_ = critics_;
}

int PpoAgent::network_count() const {
  return static_cast<int>(actors_.size() + critics_.size());
}

void PpoAgent::sync_targets() { targets_ = critics_; }

double PpoAgent::value(int critic, std::span<const double> observation) const {
  return critics_.at(static_cast<std::size_t>(critic)).forward(observation)[0];
}

double PpoAgent::target_value(int critic, std::span<const double> observation) const {
  return targets_.at(static_cast<std::size_t>(critic)).forward(observation)[0];
}

Decision PpoAgent::act(std::span<const double> observation, Rng& rng, bool greedy) {
  Decision d;
  d.actions.groups.resize(specs_.size());
  d.branch_log_probs.assign(specs_.size(), 0.0);
  std::vector<double> lps;
  for (const auto& actor : actors_) {
    actor.sample(observation, d.actions, lps, &rng, greedy);
    for (std::size_t i = 0; i < lps.size(); ++i) d.branch_log_probs[actor.owned()[i]] = lps[i];
  }
  d.joint_log_prob = std::accumulate(d.branch_log_probs.begin(), d.branch_log_probs.end(), 0.0);
  for (int c = 0; c < layout_.critic_count; ++c) d.values.push_back(value(c, observation));
  d.chained_inputs = chained_states(observation, specs_, d.actions);
  return d;
}

std::vector<double> PpoAgent::branch_log_probs(std::span<const double> observation,
                                               const BranchActions& actions) const {
  std::vector<double> out(specs_.size(), 0.0);
  BranchedActor::Pass pass;
  std::vector<double> lps;
  double entropy = 0.0;
  for (const auto& actor : actors_) {
    actor.evaluate(observation, actions, pass, lps, entropy);
    for (std::size_t i = 0; i < lps.size(); ++i) out[actor.owned()[i]] = lps[i];
  }
  return out;
}

PpoAgent::Prepared PpoAgent::prepare(const Trajectory& segment) const {
  const std::size_t n = segment.size();
  std::vector<double> rewards(n);
  std::vector<bool> dones(n);
  for (std::size_t t = 0; t < n; ++t) {
    rewards[t] = segment[t].reward;
    dones[t] = segment[t].done;
  }
  Prepared p;
  for (int c = 0; c < layout_.critic_count; ++c) {
    std::vector<double> v(n), v_next(n);
    for (std::size_t t = 0; t < n; ++t) {
      v[t] = target_value(c, segment[t].observation);
      v_next[t] = target_value(c, segment[t].next_observation);
    }
    auto adv = gae(rewards, v, v_next, dones, config_.gamma, config_.lambda);
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = adv[t] + v[t];
    p.targets.push_back(std::move(y));
    p.raw_advantages.push_back(adv);
    if (config_.normalize_advantages) normalize(adv);
    p.advantages.push_back(std::move(adv));
  }
  return p;
}

UpdateStats PpoAgent::update(const Trajectory& segment) {
  UpdateStats stats;
  if (segment.empty()) return stats;
  const Prepared prep = prepare(segment);
  const std::size_t n = segment.size();
  const std::size_t mb = static_cast<std::size_t>(config_.minibatch_size);
  const double eps = config_.clip_epsilon;

  std::vector<std::size_t> order(n);
  std::vector<std::vector<neural::Vector>> actor_grads(actors_.size());
  std::vector<neural::Vector> critic_grads(critics_.size());
  BranchedActor::Pass pass;
  std::vector<double> lps, dlogp;
  neural::Mlp::Cache cache;

  double actor_loss_sum = 0.0, critic_loss_sum = 0.0, entropy_sum = 0.0;
  std::size_t actor_samples = 0, critic_samples = 0, clipped = 0;

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng_);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t stop = std::min(n, start + mb);
      const double inv_b = 1.0 / static_cast<double>(stop - start);

      for (std::size_t a = 0; a < actors_.size(); ++a) {
        BranchedActor& actor = actors_[a];
        const auto nets = std::as_const(actor).networks();
        auto& grads = actor_grads[a];
        grads.resize(nets.size());
        for (std::size_t k = 0; k < nets.size(); ++k) grads[k].assign(nets[k]->parameter_count(), 0.0);
        const auto& adv = prep.advantages[static_cast<std::size_t>(layout_.actor_critic[a])];

        for (std::size_t i = start; i < stop; ++i) {
          const Transition& tr = segment[order[i]];
          double entropy = 0.0;
          actor.evaluate(tr.observation, tr.actions, pass, lps, entropy);
          double log_ratio = 0.0;
          for (std::size_t j = 0; j < lps.size(); ++j) {
            log_ratio += lps[j] - tr.branch_log_probs.at(static_cast<std::size_t>(actor.owned()[j]));
          }
          const double ratio = std::exp(log_ratio);
          const double A = adv[order[i]];
          const double clipped_ratio = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
          const double objective = std::min(ratio * A, clipped_ratio * A);
          // The min picks the clipped term exactly when the ratio has left the
          // trust region in the direction the advantage rewards; its gradient is zero.
          const bool active = A >= 0.0 ? ratio <= 1.0 + eps : ratio >= 1.0 - eps;
          if (!active) ++clipped;
          actor_loss_sum += -objective - config_.entropy_coef * entropy;
          entropy_sum += entropy;
          ++actor_samples;

          dlogp.assign(lps.size(), active ? -ratio * A * inv_b : 0.0);
          actor.backward(pass, tr.actions, dlogp, -config_.entropy_coef * inv_b, grads);
        }
        const auto mnets = actor.networks();
        for (std::size_t k = 0; k < mnets.size(); ++k) {
          neural::adam_step(mnets[k]->parameters(), grads[k], actor_opt_[a][k]);
        }
      }

      for (std::size_t c = 0; c < critics_.size(); ++c) {
        neural::Mlp& critic = critics_[c];
        critic_grads[c].assign(critic.parameter_count(), 0.0);
        const auto& y = prep.targets[c];
        for (std::size_t i = start; i < stop; ++i) {
          const Transition& tr = segment[order[i]];
          const double v = critic.forward(tr.observation, cache)[0];
          const double err = v - y[order[i]];
          critic_loss_sum += err * err;
          ++critic_samples;
          const double g = 2.0 * err * inv_b;
          critic.backward(cache, std::span<const double>(&g, 1), critic_grads[c]);
        }
        neural::adam_step(critic.parameters(), critic_grads[c], critic_opt_[c]);
      }

      ++gradient_steps_;
      ++stats.gradient_steps;
      if (gradient_steps_ % config_.target_sync_interval == 0) sync_targets();
    }
  }
  stats.actor_loss = actor_loss_sum / static_cast<double>(std::max<std::size_t>(actor_samples, 1));
  stats.critic_loss = critic_loss_sum / static_cast<double>(std::max<std::size_t>(critic_samples, 1));
  stats.entropy = entropy_sum / static_cast<double>(std::max<std::size_t>(actor_samples, 1));
  stats.clip_fraction =
      static_cast<double>(clipped) / static_cast<double>(std::max<std::size_t>(actor_samples, 1));
  return stats;
}

namespace {

void put_adam(neural::ParameterArchive& ar, const std::string& name, const neural::AdamState& s) {
  const auto size = static_cast<std::int64_t>(s.m.size());
  ar.put(name + ".m", {size}, s.m);
  ar.put(name + ".v", {size}, s.v);
  ar.put_text(name + ".step", std::to_string(s.step));
}

void get_adam(const neural::ParameterArchive& ar, const std::string& name, neural::AdamState& s) {
  ar.get_into(name + ".m", s.m);
  ar.get_into(name + ".v", s.v);
  s.step = std::stoll(ar.text(name + ".step"));
}

}  // namespace

void PpoAgent::save(neural::ParameterArchive& ar) const {
  for (std::size_t a = 0; a < actors_.size(); ++a) {
    const auto nets = actors_[a].networks();
    for (std::size_t k = 0; k < nets.size(); ++k) {
      const std::string base = "actor" + std::to_string(a) + ".net" + std::to_string(k);
      ar.put(base, *nets[k]);
      put_adam(ar, "adam." + base, actor_opt_[a][k]);
    }
  }
  for (std::size_t c = 0; c < critics_.size(); ++c) {
    const std::string base = "critic" + std::to_string(c);
    ar.put(base, critics_[c]);
    ar.put("target" + std::to_string(c), targets_[c]);
    put_adam(ar, "adam." + base, critic_opt_[c]);
  }
  ar.put_text("agent.name", name_);
  ar.put_text("agent.gradient_steps", std::to_string(gradient_steps_));
  std::ostringstream rng;
  rng << shuffle_rng_;
  ar.put_text("agent.shuffle_rng", rng.str());
}

void PpoAgent::load(const neural::ParameterArchive& ar) {
  if (ar.text("agent.name") != name_) {
    throw ConfigError("checkpoint holds a '" + ar.text("agent.name") + "' agent, not '" + name_ + "'");
  }
  for (std::size_t a = 0; a < actors_.size(); ++a) {
    const auto nets = actors_[a].networks();
    for (std::size_t k = 0; k < nets.size(); ++k) {
      const std::string base = "actor" + std::to_string(a) + ".net" + std::to_string(k);
      ar.get_into(base, *nets[k]);
      get_adam(ar, "adam." + base, actor_opt_[a][k]);
    }
  }
  for (std::size_t c = 0; c < critics_.size(); ++c) {
    const std::string base = "critic" + std::to_string(c);
    ar.get_into(base, critics_[c]);
    ar.get_into("target" + std::to_string(c), targets_[c]);
    get_adam(ar, "adam." + base, critic_opt_[c]);
  }
  gradient_steps_ = std::stoll(ar.text("agent.gradient_steps"));
  std::istringstream rng(ar.text("agent.shuffle_rng"));
  rng >> shuffle_rng_;
}

std::unique_ptr<PpoAgent> make_sabppo(int obs_dim, std::vector<BranchSpec> specs, PpoConfig config,
                                      std::uint64_t seed) {
  PpoAgent::Layout layout;
  layout.actor_branches.emplace_back(specs.size());
  std::iota(layout.actor_branches[0].begin(), layout.actor_branches[0].end(), 0);
  layout.chained = true;
  layout.actor_critic = {0};
  layout.critic_count = 1;
  return std::make_unique<PpoAgent>("sabppo", obs_dim, std::move(specs), std::move(layout),
                                    std::move(config), seed);
}

namespace {

PpoAgent::Layout per_branch_layout(std::size_t branches, bool shared_critic) {
  PpoAgent::Layout layout;
  for (std::size_t b = 0; b < branches; ++b) {
    layout.actor_branches.push_back({static_cast<int>(b)});
    layout.actor_critic.push_back(shared_critic ? 0 : static_cast<int>(b));
  }
  layout.critic_count = shared_critic ? 1 : static_cast<int>(branches);
  return layout;
}

}  // namespace

std::unique_ptr<PpoAgent> make_happo(int obs_dim, std::vector<BranchSpec> specs, PpoConfig config,
                                     std::uint64_t seed) {
  auto layout = per_branch_layout(specs.size(), true);
  return std::make_unique<PpoAgent>("happo", obs_dim, std::move(specs), std::move(layout),
                                    std::move(config), seed);
}

std::unique_ptr<PpoAgent> make_iterrl(int obs_dim, std::vector<BranchSpec> specs, PpoConfig config,
                                      std::uint64_t seed) {
  auto layout = per_branch_layout(specs.size(), false);
  return std::make_unique<PpoAgent>("iterrl", obs_dim, std::move(specs), std::move(layout),
                                    std::move(config), seed);
}

}  // namespace peatsim::agents

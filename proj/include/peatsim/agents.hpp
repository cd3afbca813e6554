#pragma once

// Controllers over the branched action space.
//
// Every learning controller is a PpoAgent; they differ only in how branches are
// grouped into actors and which critic scores each actor:
//
//   SABPPO  one actor owning all four branches, chained (each head sees the
//           shared latent plus the encodings of the branches before it), one
//           critic with a hard-synced target copy. Ratio and advantage are joint.
//   HAPPO   one actor per branch on the base state, one shared critic;
//           per-branch ratios, updated simultaneously.
//   iterRL  one actor and one critic per branch, each learner independent.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "peatsim/action.hpp"
#include "peatsim/neural.hpp"

namespace peatsim::agents {

struct PpoConfig {
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  int epochs = 4;             // O
  int minibatch_size = 64;
  int segment_length = 100;   // steps collected per update
  int target_sync_interval = 512;  // C, in gradient steps
  double entropy_coef = 0.01;
  bool normalize_advantages = true;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  std::vector<int> hidden{64, 64};

  void validate() const;
};

/// ϖ_t = Σ_k (γλ)^k δ_{t+k}, δ_t = r_t + γ V(s_{t+1}) (1 - done_t) - V(s_t);
/// the sum stops after a step flagged done.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const double> next_values, const std::vector<bool>& dones,
                        double gamma, double lambda);

// --- branch helpers --------------------------------------------------------

struct BranchDraw {
  std::vector<int> choice;
  double log_prob = 0.0;
};

BranchDraw sample_branch(const BranchSpec& spec, std::span<const double> logits,
                         std::span<const int> selection, Rng* rng, bool greedy);
double branch_log_prob(const BranchSpec& spec, std::span<const double> logits,
                       std::span<const int> choice, std::span<const int> selection);
double branch_entropy(const BranchSpec& spec, std::span<const double> logits,
                      std::span<const int> choice, std::span<const int> selection);
/// out += logp_scale * dlogp/dlogits + entropy_scale * dH/dlogits
void branch_gradient(const BranchSpec& spec, std::span<const double> logits,
                     std::span<const int> choice, std::span<const int> selection,
                     double logp_scale, double entropy_scale, std::span<double> out);

/// s_1 followed by the encodings of every earlier branch, one vector per branch.
std::vector<std::vector<double>> chained_states(std::span<const double> observation,
                                                std::span<const BranchSpec> specs,
                                                const BranchActions& actions);

// --- actor -----------------------------------------------------------------

/// Shared tanh trunk over the base state feeding one linear head per owned branch.
/// When chained, head i also receives the encodings of owned branches 0..i-1.
class BranchedActor {
 public:
  struct Pass {
    neural::Mlp::Cache trunk;
    std::vector<neural::Mlp::Cache> heads;
  };

  BranchedActor(int obs_dim, std::vector<BranchSpec> specs, std::vector<int> owned, bool chained,
                const std::vector<int>& hidden, Rng& init_rng);

  /// Fills `actions.groups[b]` for every owned branch b. A per-device branch
  /// reads the selection from group 0, which must already be filled.
  void sample(std::span<const double> obs, BranchActions& actions, std::vector<double>& log_probs,
              Rng* rng, bool greedy) const;

  /// Log-probabilities (owned order) and summed entropy of the given actions.
  void evaluate(std::span<const double> obs, const BranchActions& actions, Pass& pass,
                std::vector<double>& log_probs, double& entropy) const;

  /// Accumulates parameter gradients of Σ_i dlogp[i]·logp_i + dentropy·H.
  void backward(const Pass& pass, const BranchActions& actions, std::span<const double> dlogp,
                double dentropy, std::vector<neural::Vector>& grads) const;

  const std::vector<int>& owned() const { return owned_; }
  bool chained() const { return chained_; }
  std::vector<neural::Mlp*> networks();
  std::vector<const neural::Mlp*> networks() const;

 private:
  std::vector<double> head_input(const neural::Vector& latent, std::size_t head,
                                 const BranchActions& actions) const;

  std::vector<BranchSpec> specs_;  // all branches of the action space
  std::vector<int> owned_;
  bool chained_;
  neural::Mlp trunk_;
  std::vector<neural::Mlp> heads_;
};

// --- agents ----------------------------------------------------------------

struct Decision {
  BranchActions actions;
  std::vector<double> branch_log_probs;  // indexed by branch
  double joint_log_prob = 0.0;
  std::vector<double> values;            // one per critic
  std::vector<std::vector<double>> chained_inputs;
};

struct Transition {
  std::vector<double> observation;
  std::vector<std::vector<double>> chained_inputs;
  BranchActions actions;
  std::vector<double> branch_log_probs;
  double joint_log_prob = 0.0;
  double reward = 0.0;
  std::vector<double> values;
  std::vector<double> next_observation;
  bool done = false;
};

using Trajectory = std::vector<Transition>;

struct UpdateStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  int gradient_steps = 0;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual Decision act(std::span<const double> observation, Rng& rng, bool greedy) = 0;
  virtual UpdateStats update(const Trajectory& /*segment*/) { return {}; }
  virtual bool trainable() const { return false; }
  /// Networks that receive gradient updates (target copies excluded).
  virtual int network_count() const { return 0; }
  virtual void save(neural::ParameterArchive& /*archive*/) const {}
  virtual void load(const neural::ParameterArchive& /*archive*/) {}
};

class PpoAgent : public Agent {
 public:
  struct Layout {
    std::vector<std::vector<int>> actor_branches;
    bool chained = false;
    std::vector<int> actor_critic;  // critic index used by each actor
    int critic_count = 1;
  };

  /// Advantages (possibly normalized, used by actors) and critic regression targets.
  struct Prepared {
    std::vector<std::vector<double>> raw_advantages;
    std::vector<std::vector<double>> advantages;
    std::vector<std::vector<double>> targets;
  };

  PpoAgent(std::string name, int obs_dim, std::vector<BranchSpec> specs, Layout layout,
           PpoConfig config, std::uint64_t seed);

  std::string name() const override { return name_; }
  Decision act(std::span<const double> observation, Rng& rng, bool greedy) override;
  UpdateStats update(const Trajectory& segment) override;
  bool trainable() const override { return true; }
  int network_count() const override;
  void save(neural::ParameterArchive& archive) const override;
  void load(const neural::ParameterArchive& archive) override;

  /// GAE with the target critics, plus regression targets ϖ + V_φ'(s).
  Prepared prepare(const Trajectory& segment) const;

  /// Current log-probability of each branch's stored action.
  std::vector<double> branch_log_probs(std::span<const double> observation,
                                       const BranchActions& actions) const;
  double value(int critic, std::span<const double> observation) const;
  double target_value(int critic, std::span<const double> observation) const;

  const Layout& layout() const { return layout_; }
  const PpoConfig& config() const { return config_; }
  std::int64_t gradient_steps() const { return gradient_steps_; }
  BranchedActor& actor(std::size_t i) { return actors_.at(i); }
  const BranchedActor& actor(std::size_t i) const { return actors_.at(i); }
  const neural::Mlp& critic(std::size_t i) const { return critics_.at(i); }
  const neural::Mlp& target_critic(std::size_t i) const { return targets_.at(i); }
  void sync_targets();

 private:
  std::string name_;
  std::vector<BranchSpec> specs_;
  Layout layout_;
  PpoConfig config_;
  std::vector<BranchedActor> actors_;
  std::vector<std::vector<neural::AdamState>> actor_opt_;
  std::vector<neural::Mlp> critics_;
  std::vector<neural::Mlp> targets_;
  std::vector<neural::AdamState> critic_opt_;
  std::int64_t gradient_steps_ = 0;
  Rng shuffle_rng_;
};

std::unique_ptr<PpoAgent> make_sabppo(int obs_dim, std::vector<BranchSpec> specs, PpoConfig config,
                                      std::uint64_t seed);
std::unique_ptr<PpoAgent> make_happo(int obs_dim, std::vector<BranchSpec> specs, PpoConfig config,
                                     std::uint64_t seed);
std::unique_ptr<PpoAgent> make_iterrl(int obs_dim, std::vector<BranchSpec> specs, PpoConfig config,
                                      std::uint64_t seed);

/// Uniform over every branch: a uniformly random ordered K-subset and uniform choices.
class RandomPolicy : public Agent {
 public:
  explicit RandomPolicy(std::vector<BranchSpec> specs) : specs_(std::move(specs)) {}
  std::string name() const override { return "random"; }
  Decision act(std::span<const double> observation, Rng& rng, bool greedy) override;

 private:
  std::vector<BranchSpec> specs_;
};

/// Conventional full-model schedule: round-robin selection, equal top levels,
/// largest retention. Reads the round index from the last observation feature.
class FixedPolicy : public Agent {
 public:
  FixedPolicy(std::vector<BranchSpec> specs, int rounds) : specs_(std::move(specs)), rounds_(rounds) {}
  std::string name() const override { return "fixed"; }
  Decision act(std::span<const double> observation, Rng& rng, bool greedy) override;

 private:
  std::vector<BranchSpec> specs_;
  int rounds_;
};

}  // namespace peatsim::agents

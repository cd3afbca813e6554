#include "peatsim/agents.hpp"

namespace peatsim::agents {

BranchedActor::BranchedActor(int obs_dim, std::vector<BranchSpec> specs, std::vector<int> owned,
                             bool chained, const std::vector<int>& hidden, Rng& init_rng)
    : specs_(std::move(specs)), owned_(std::move(owned)), chained_(chained) {
  if (owned_.empty()) throw DimensionError("an actor must own at least one branch");
  if (hidden.empty()) throw DimensionError("an actor needs at least one hidden layer");
  for (int b : owned_) {
    if (b < 0 || b >= static_cast<int>(specs_.size())) throw DimensionError("unknown branch index");
  }
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  trunk_ = neural::Mlp(sizes, true, init_rng);
  int extra = 0;
  for (int b : owned_) {
    const BranchSpec& spec = specs_[b];
    // Small output weights keep the initial policy close to uniform.
    heads_.emplace_back(std::vector<int>{hidden.back() + extra, spec.logit_count()}, false,
                        init_rng, 0.01);
    if (chained_) extra += spec.encoding_size();
  }
}

std::vector<double> BranchedActor::head_input(const neural::Vector& latent, std::size_t head,
                                              const BranchActions& actions) const {
  std::vector<double> in(latent);
  if (!chained_) return in;
  for (std::size_t j = 0; j < head; ++j) {
    const BranchSpec& spec = specs_[owned_[j]];
    const int width = spec.encoding_size();
    if (width == 0) continue;
    const std::size_t at = in.size();
    in.resize(at + static_cast<std::size_t>(width));
    encode_branch(spec, actions.groups.at(owned_[j]), actions.selection(),
                  std::span<double>(in).subspan(at));
  }
  return in;
}

void BranchedActor::sample(std::span<const double> obs, BranchActions& actions,
                           std::vector<double>& log_probs, Rng* rng, bool greedy) const {
  if (actions.groups.size() < specs_.size()) actions.groups.resize(specs_.size());
  log_probs.clear();
  const neural::Vector latent = trunk_.forward(obs);
  static const std::vector<int> kNoSelection;
  for (std::size_t i = 0; i < owned_.size(); ++i) {
    const int b = owned_[i];
    const BranchSpec& spec = specs_[b];
    const neural::Vector logits = heads_[i].forward(head_input(latent, i, actions));
    const auto& selection =
        spec.kind == BranchSpec::Kind::kSelection ? kNoSelection : actions.selection();
    BranchDraw draw = sample_branch(spec, logits, selection, rng, greedy);
    actions.groups[b] = std::move(draw.choice);
    log_probs.push_back(draw.log_prob);
  }
}

void BranchedActor::evaluate(std::span<const double> obs, const BranchActions& actions, Pass& pass,
                             std::vector<double>& log_probs, double& entropy) const {
  log_probs.clear();
  entropy = 0.0;
  const neural::Vector& latent = trunk_.forward(obs, pass.trunk);
  pass.heads.resize(owned_.size());
  for (std::size_t i = 0; i < owned_.size(); ++i) {
    const int b = owned_[i];
    const BranchSpec& spec = specs_[b];
    const neural::Vector& logits = heads_[i].forward(head_input(latent, i, actions), pass.heads[i]);
    log_probs.push_back(branch_log_prob(spec, logits, actions.groups.at(b), actions.selection()));
    entropy += branch_entropy(spec, logits, actions.groups.at(b), actions.selection());
  }
}

void BranchedActor::backward(const Pass& pass, const BranchActions& actions,
                             std::span<const double> dlogp, double dentropy,
                             std::vector<neural::Vector>& grads) const {
  const std::size_t latent_size = static_cast<std::size_t>(trunk_.output_size());
  neural::Vector latent_grad(latent_size, 0.0);
  neural::Vector input_grad;
  for (std::size_t i = 0; i < owned_.size(); ++i) {
    const int b = owned_[i];
    const BranchSpec& spec = specs_[b];
    const neural::Vector& logits = pass.heads[i].activations.back();
    neural::Vector g(logits.size(), 0.0);
    branch_gradient(spec, logits, actions.groups.at(b), actions.selection(), dlogp[i], dentropy, g);
    heads_[i].backward(pass.heads[i], g, grads[1 + i], &input_grad);
    // The chained encodings are fixed inputs; only the latent part flows back.
    for (std::size_t j = 0; j < latent_size; ++j) latent_grad[j] += input_grad[j];
  }
  trunk_.backward(pass.trunk, latent_grad, grads[0]);
}

std::vector<neural::Mlp*> BranchedActor::networks() {
  std::vector<neural::Mlp*> nets{&trunk_};
  for (auto& h : heads_) nets.push_back(&h);
  return nets;
}

std::vector<const neural::Mlp*> BranchedActor::networks() const {
  std::vector<const neural::Mlp*> nets{&trunk_};
  for (const auto& h : heads_) nets.push_back(&h);
  return nets;
}

}  // namespace peatsim::agents

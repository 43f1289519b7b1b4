#include "oppo/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace oppo {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kPpo: return "ppo";
    case Variant::kOppoExact: return "oppo_exact";
    case Variant::kOppoRnd: return "oppo_rnd";
    case Variant::kRnd: return "rnd";
  }
  throw std::logic_error("variant_name: bad enum");
}

Variant variant_from_string(const std::string& name) {
  if (name == "ppo") return Variant::kPpo;
  if (name == "oppo_exact") return Variant::kOppoExact;
  if (name == "oppo_rnd") return Variant::kOppoRnd;
  if (name == "rnd") return Variant::kRnd;
  throw std::invalid_argument("unknown variant: " + name);
}

void AgentConfig::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("AgentConfig: beta must be non-negative");
  if (!(c >= 0.0)) throw std::invalid_argument("AgentConfig: c must be non-negative");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw std::invalid_argument("AgentConfig: clip in (0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("AgentConfig: gamma in (0,1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("AgentConfig: lambda in [0,1]");
  if (actors < 1 || steps_per_actor < 1) throw std::invalid_argument("AgentConfig: actors/steps must be positive");
  if (epochs < 1 || minibatches < 1) throw std::invalid_argument("AgentConfig: epochs/minibatches must be positive");
  if (minibatches > actors * steps_per_actor) throw std::invalid_argument("AgentConfig: more minibatches than samples");
  if (!(lr_policy >= 0.0 && lr_value >= 0.0 && rnd_lr >= 0.0)) {
    throw std::invalid_argument("AgentConfig: learning rates must be non-negative");
  }
  if (!(entropy_coef >= 0.0 && value_coef >= 0.0)) throw std::invalid_argument("AgentConfig: coefficients >= 0");
  if (rnd_hidden < 1 || rnd_output < 1 || rnd_steps_per_update < 1 || rnd_warmup < 0 ||
      rnd_train_ramp_updates < -1 || rnd_lr_anneal_updates < -1 || rnd_predictor_extra_layers < 0 ||
      rnd_train_delay_updates < 0) {
    throw std::invalid_argument("AgentConfig: bad rnd settings");
  }
}

void TableAdam::ascend(std::vector<double>& params, std::span<const double> ascent_grad) {
  if (params.size() != m.size() || ascent_grad.size() != m.size()) {
    throw std::invalid_argument("TableAdam: shape mismatch");
  }
  step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = ascent_grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    params[i] += lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

GaeResult gae(const TrajectoryBatch& batch, std::span<const double> state_values, std::span<const double> rewards,
              double discount, double lambda) {
  if (rewards.size() != batch.size()) throw std::invalid_argument("gae: rewards size mismatch");
  GaeResult out;
  out.advantage.assign(batch.size(), 0.0);
  out.value_target.assign(batch.size(), 0.0);
  for (int n = 0; n < batch.actors; ++n) {
    double carry = 0.0;
    for (int h = batch.steps - 1; h >= 0; --h) {
      const std::size_t i = batch.idx(n, h);
      const double nonterminal = batch.done[i] ? 0.0 : 1.0;
      const double delta =
          rewards[i] + discount * nonterminal * state_values[batch.next_state[i]] - state_values[batch.state[i]];
      carry = delta + discount * lambda * nonterminal * carry;
      out.advantage[i] = carry;
      out.value_target[i] = carry + state_values[batch.state[i]];
    }
  }
  return out;
}

double eta2_estimate(const TrajectoryBatch& batch, std::span<const double> v2, std::span<const double> adv2,
                     bool aggregate_sum) {
  if (adv2.size() != batch.size()) throw std::invalid_argument("eta2_estimate: advantage size mismatch");
  double total = 0.0;
  for (int n = 0; n < batch.actors; ++n) {
    std::size_t anchor = batch.idx(n, 0);
    for (int h = 0; h < batch.steps; ++h) {
      const std::size_t i = batch.idx(n, h);
      if (batch.episode_start[i]) {
        anchor = i;
        break;
      }
    }
    total += std::max(0.0, v2[batch.state[anchor]] + adv2[anchor]);
  }
  return aggregate_sum ? total : total / static_cast<double>(batch.actors);
}

std::vector<double> optimistic_advantage(std::span<const double> adv1, std::span<const double> adv2, double beta,
                                         double c, double eta2) {
  if (adv1.size() != adv2.size()) throw std::invalid_argument("optimistic_advantage: size mismatch");
  std::vector<double> out(adv1.begin(), adv1.end());
  if (beta == 0.0) return out;
  const double shifted = eta2 + c;
  if (!(shifted > 0.0)) throw std::invalid_argument("optimistic_advantage: eta2 + c must be positive");
  const double scale = beta / std::sqrt(shifted);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * adv2[i];
  return out;
}

namespace {

struct SampleRatio {
  double ratio;
  bool clip_active;
};

inline SampleRatio ratio_for(const PolicyTable& policy, const TrajectoryBatch& batch, std::size_t i,
                             std::span<const double> advantage, double eps, std::span<double> probs_buf) {
  const int s = batch.state[i];
  policy.probs_row(s, probs_buf);
  const double l = std::exp(std::log(probs_buf[batch.action[i]]) - batch.logp_old[i]);
  const double adv = advantage[i];
  const bool clipped_branch = (adv > 0.0 && l > 1.0 + eps) || (adv < 0.0 && l < 1.0 - eps);
  return {l, clipped_branch};
}

}  // namespace

double clipped_objective(const PolicyTable& policy, const TrajectoryBatch& batch,
                         std::span<const std::size_t> indices, std::span<const double> advantage, double clip_epsilon,
                         double* clip_fraction) {
  if (indices.empty()) throw std::invalid_argument("clipped_objective: empty index set");
  std::vector<double> probs(policy.num_actions);
  double total = 0.0;
  long clipped = 0;
  for (std::size_t i : indices) {
    const auto r = ratio_for(policy, batch, i, advantage, clip_epsilon, probs);
    const double clamped = std::clamp(r.ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    total += std::min(r.ratio * advantage[i], clamped * advantage[i]);
    if (std::abs(r.ratio - 1.0) > clip_epsilon) ++clipped;
  }
  if (clip_fraction != nullptr) *clip_fraction = static_cast<double>(clipped) / static_cast<double>(indices.size());
  return total / static_cast<double>(indices.size());
}

double policy_objective(const PolicyTable& policy, const TrajectoryBatch& batch, std::span<const std::size_t> indices,
                        std::span<const double> advantage, double clip_epsilon, double entropy_coef) {
  double objective = clipped_objective(policy, batch, indices, advantage, clip_epsilon);
  if (entropy_coef != 0.0) {
    std::vector<double> probs(policy.num_actions);
    double entropy_total = 0.0;
    for (std::size_t i : indices) {
      policy.probs_row(batch.state[i], probs);
      double entropy = 0.0;
      for (double p : probs) {
        if (p > 0.0) entropy -= p * std::log(p);
      }
      entropy_total += entropy;
    }
    objective += entropy_coef * entropy_total / static_cast<double>(indices.size());
  }
  return objective;
}

void policy_objective_gradient(const PolicyTable& policy, const TrajectoryBatch& batch,
                               std::span<const std::size_t> indices, std::span<const double> advantage,
                               double clip_epsilon, double entropy_coef, std::span<double> grad_out,
                               double* clip_fraction) {
  if (grad_out.size() != policy.logits.size()) throw std::invalid_argument("policy gradient: output size mismatch");
  if (indices.empty()) throw std::invalid_argument("policy gradient: empty index set");
  std::fill(grad_out.begin(), grad_out.end(), 0.0);
  const int A = policy.num_actions;
  std::vector<double> probs(A);
  const double inv_count = 1.0 / static_cast<double>(indices.size());
  long clipped = 0;
  for (std::size_t i : indices) {
    const int s = batch.state[i];
    policy.probs_row(s, probs);
    const int a = batch.action[i];
    const double l = std::exp(std::log(probs[a]) - batch.logp_old[i]);
    const double adv = advantage[i];
    const bool clipped_branch = (adv > 0.0 && l > 1.0 + clip_epsilon) || (adv < 0.0 && l < 1.0 - clip_epsilon);
    if (std::abs(l - 1.0) > clip_epsilon) ++clipped;
    double* grad_row = grad_out.data() + static_cast<std::size_t>(s) * A;
    if (!clipped_branch) {
      const double coef = adv * l * inv_count;
      for (int b = 0; b < A; ++b) grad_row[b] += coef * ((b == a ? 1.0 : 0.0) - probs[b]);
    }
    if (entropy_coef != 0.0) {
      double entropy = 0.0;
      for (double p : probs) {
        if (p > 0.0) entropy -= p * std::log(p);
      }
      for (int b = 0; b < A; ++b) {
        const double p = probs[b];
        if (p > 0.0) grad_row[b] -= entropy_coef * inv_count * p * (std::log(p) + entropy);
      }
    }
  }
  if (clip_fraction != nullptr) *clip_fraction = static_cast<double>(clipped) / static_cast<double>(indices.size());
}

Agent::Agent(const TabularMdp& mdp, const AgentConfig& config, std::uint64_t seed)
    : mdp_(&mdp), cfg_(config), rng_action_(Rng::stream(seed, 1)), rng_shuffle_(Rng::stream(seed, 2)) {
  mdp.validate();
  cfg_.validate();
  policy_ = PolicyTable(mdp.num_states, mdp.num_actions);
  v1_.assign(mdp.num_states, 0.0);
  v2_.assign(mdp.num_states, 0.0);
  opt_policy_ = TableAdam(policy_.logits.size(), cfg_.lr_policy);
  opt_v1_ = TableAdam(v1_.size(), cfg_.lr_value);
  opt_v2_ = TableAdam(v2_.size(), cfg_.lr_value);
  visit_counts_.assign(mdp.num_states, 0);
  episode_return_.assign(cfg_.actors, 0.0);
  if (uses_rnd()) {
    Rng rnd_init = Rng::stream(seed, 3);
    RndConfig rc;
    rc.input_size = mdp.num_states;
    rc.hidden_size = cfg_.rnd_hidden;
    rc.output_size = cfg_.rnd_output;
    rc.predictor_extra_layers = cfg_.rnd_predictor_extra_layers;
    rc.lr = cfg_.rnd_lr;
    rc.steps_per_update = cfg_.rnd_steps_per_update;
    rc.normalize = cfg_.rnd_normalize;
    rc.warmup_observations = cfg_.rnd_warmup;
    rnd_.emplace(rc, rnd_init);
  }
  envs_.reserve(cfg_.actors);
  for (int n = 0; n < cfg_.actors; ++n) {
    envs_.emplace_back(mdp, Rng::stream(seed, 1000 + static_cast<std::uint64_t>(n)));
  }
}

double Agent::bonus_for(int next_state, std::vector<double>& cache, std::vector<std::uint8_t>& cached) const {
  if (!cached[next_state]) {
    cache[next_state] = rnd_->raw_bonus_state(next_state);
    cached[next_state] = 1;
  }
  return cache[next_state];
}

TrajectoryBatch Agent::collect() {
  TrajectoryBatch batch;
  batch.actors = cfg_.actors;
  batch.steps = cfg_.steps_per_actor;
  const std::size_t total = batch.size();
  batch.state.resize(total);
  batch.action.resize(total);
  batch.next_state.resize(total);
  batch.reward1.resize(total);
  batch.reward2.resize(total);
  batch.logp_old.resize(total);
  batch.done.resize(total);
  batch.episode_start.resize(total);
  batch.next_count.resize(total);
  batch.raw_bonus_next.assign(total, 0.0);

  // Bonuses are evaluated against the predictor as frozen at batch start.
  std::vector<double> bonus_cache;
  std::vector<std::uint8_t> bonus_cached;
  if (uses_rnd()) {
    bonus_cache.assign(mdp_->num_states, 0.0);
    bonus_cached.assign(mdp_->num_states, 0);
  }

  std::vector<double> probs(mdp_->num_actions);
  for (int n = 0; n < cfg_.actors; ++n) {
    EpisodeSim& env = envs_[n];
    for (int h = 0; h < cfg_.steps_per_actor; ++h) {
      const std::size_t i = batch.idx(n, h);
      const int s = env.state();
      batch.episode_start[i] = env.time() == 0 ? 1 : 0;
      policy_.probs_row(s, probs);
      const int a = rng_action_.categorical(probs);
      const Transition tr = env.step_action(a);
      batch.state[i] = s;
      batch.action[i] = a;
      batch.next_state[i] = tr.next_state;
      batch.reward1[i] = tr.reward;
      batch.logp_old[i] = std::log(probs[a]);
      batch.done[i] = tr.episode_done ? 1 : 0;
      visit_counts_[tr.next_state] += 1;
      batch.next_count[i] = visit_counts_[tr.next_state];
      switch (cfg_.variant) {
        case Variant::kPpo:
          batch.reward2[i] = 0.0;
          break;
        case Variant::kOppoExact:
          batch.reward2[i] = 1.0 / static_cast<double>(batch.next_count[i]);
          break;
        case Variant::kOppoRnd:
        case Variant::kRnd: {
          const double raw = bonus_for(tr.next_state, bonus_cache, bonus_cached);
          batch.raw_bonus_next[i] = raw;
          batch.reward2[i] = cfg_.rnd_normalize ? rnd_->normalized_bonus_state(tr.next_state) : raw;
          break;
        }
      }
      episode_return_[n] += tr.reward;
      if (tr.episode_done) {
        batch.episode_rewards_completed.push_back(episode_return_[n]);
        episode_return_[n] = 0.0;
      }
    }
  }
  total_env_steps_ += static_cast<long long>(total);
  return batch;
}

UpdateMetrics Agent::update(const TrajectoryBatch& batch) {
  UpdateMetrics metrics;
  metrics.episodes_completed = static_cast<int>(batch.episode_rewards_completed.size());
  const std::size_t total = batch.size();

  std::vector<double> combined;
  std::span<const double> head1_rewards(batch.reward1);
  if (cfg_.variant == Variant::kRnd) {
    combined.resize(total);
    for (std::size_t i = 0; i < total; ++i) combined[i] = batch.reward1[i] + batch.reward2[i];
    head1_rewards = combined;
  }
  const GaeResult g1 = gae(batch, v1_, head1_rewards, cfg_.gamma, cfg_.lambda);
  const GaeResult g2 = gae(batch, v2_, batch.reward2, cfg_.gamma * cfg_.gamma, cfg_.lambda);
  metrics.eta2 = eta2_estimate(batch, v2_, g2.advantage, cfg_.eta2_sum);

  std::vector<double> adv;
  switch (cfg_.variant) {
    case Variant::kPpo:
    case Variant::kRnd:
      adv = g1.advantage;
      break;
    case Variant::kOppoExact:
    case Variant::kOppoRnd:
      adv = optimistic_advantage(g1.advantage, g2.advantage, cfg_.beta, cfg_.c, metrics.eta2);
      break;
  }

  double mean_r2 = 0.0;
  for (std::size_t i = 0; i < total; ++i) mean_r2 += batch.reward2[i];
  metrics.mean_reward2 = mean_r2 / static_cast<double>(total);

  // Sampling-policy entropy over the batch, before any parameter movement.
  {
    std::vector<double> probs(policy_.num_actions);
    double entropy_total = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
      policy_.probs_row(batch.state[i], probs);
      for (double p : probs) {
        if (p > 0.0) entropy_total -= p * std::log(p);
      }
    }
    metrics.entropy = entropy_total / static_cast<double>(total);
  }

  const std::vector<double> logits_snapshot = policy_.logits;
  const std::vector<double> v1_snapshot = v1_;
  const std::vector<double> v2_snapshot = v2_;
  const TableAdam opt_policy_snapshot = opt_policy_;
  const TableAdam opt_v1_snapshot = opt_v1_;
  const TableAdam opt_v2_snapshot = opt_v2_;

  const bool train_head2 = cfg_.variant != Variant::kRnd;
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(policy_.logits.size());
  std::vector<double> grad_v1(v1_.size());
  std::vector<double> grad_v2(v2_.size());
  double clip_fraction_total = 0.0;
  long clip_fraction_batches = 0;
  bool aborted = false;

  for (int epoch = 0; epoch < cfg_.epochs && !aborted; ++epoch) {
    for (std::size_t k = total - 1; k > 0; --k) {
      const std::size_t j = static_cast<std::size_t>(rng_shuffle_.uniform_int(static_cast<int>(k + 1)));
      std::swap(order[k], order[j]);
    }
    const std::size_t chunk = total / cfg_.minibatches;
    const std::size_t remainder = total % cfg_.minibatches;
    std::size_t offset = 0;
    for (int mb = 0; mb < cfg_.minibatches && !aborted; ++mb) {
      const std::size_t size = chunk + (static_cast<std::size_t>(mb) < remainder ? 1 : 0);
      const std::span<const std::size_t> indices(order.data() + offset, size);
      offset += size;
      if (indices.empty()) continue;

      double clip_fraction = 0.0;
      policy_objective_gradient(policy_, batch, indices, adv, cfg_.clip_epsilon, cfg_.entropy_coef, grad,
                                &clip_fraction);
      clip_fraction_total += clip_fraction;
      clip_fraction_batches += 1;

      const double objective = policy_objective(policy_, batch, indices, adv, cfg_.clip_epsilon, cfg_.entropy_coef);
      double value_loss = 0.0;
      const double inv_count = 1.0 / static_cast<double>(indices.size());
      std::fill(grad_v1.begin(), grad_v1.end(), 0.0);
      std::fill(grad_v2.begin(), grad_v2.end(), 0.0);
      for (std::size_t i : indices) {
        const int s = batch.state[i];
        const double e1 = v1_[s] - g1.value_target[i];
        value_loss += e1 * e1;
        grad_v1[s] -= cfg_.value_coef * 2.0 * e1 * inv_count;  // ascent on -value loss
        if (train_head2) {
          const double e2 = v2_[s] - g2.value_target[i];
          value_loss += e2 * e2;
          grad_v2[s] -= cfg_.value_coef * 2.0 * e2 * inv_count;
        }
      }
      value_loss *= inv_count;
      metrics.policy_objective_value = objective;
      metrics.value_loss = value_loss;
      if (!std::isfinite(objective) || !std::isfinite(value_loss)) {
        aborted = true;
        break;
      }

      opt_policy_.ascend(policy_.logits, grad);
      opt_v1_.ascend(v1_, grad_v1);
      if (train_head2) opt_v2_.ascend(v2_, grad_v2);
    }
  }

  if (aborted) {
    policy_.logits = logits_snapshot;
    v1_ = v1_snapshot;
    v2_ = v2_snapshot;
    opt_policy_ = opt_policy_snapshot;
    opt_v1_ = opt_v1_snapshot;
    opt_v2_ = opt_v2_snapshot;
    metrics.nan_abort = true;
    return metrics;
  }

  metrics.clip_fraction = clip_fraction_batches > 0 ? clip_fraction_total / clip_fraction_batches : 0.0;

  if (uses_rnd() && updates_done_ >= cfg_.rnd_train_delay_updates) {
    int steps = cfg_.rnd_steps_per_update;
    if (cfg_.rnd_train_ramp_updates > 0) {
      const double frac =
          std::min(1.0, static_cast<double>(updates_done_) / static_cast<double>(cfg_.rnd_train_ramp_updates));
      steps = std::max(1, static_cast<int>(std::lround(frac * cfg_.rnd_steps_per_update)));
    }
    if (cfg_.rnd_lr_anneal_updates > 0) {
      const double frac =
          std::min(1.0, static_cast<double>(updates_done_) / static_cast<double>(cfg_.rnd_lr_anneal_updates));
      rnd_->set_learning_rate(cfg_.rnd_lr * std::clamp(2.0 * (1.0 - frac), 0.0, 1.0));
    }
    // Predictor trains on the batch's distinct next-state observations with
    // equal weight, so rarely-revisited states lose their novelty at the
    // same pace as the busy ones.
    std::vector<long> counts(mdp_->num_states, 0);
    for (std::size_t i = 0; i < total; ++i) counts[batch.next_state[i]] += 1;
    std::vector<int> states;
    for (int s = 0; s < mdp_->num_states; ++s) {
      if (counts[s] > 0) states.push_back(s);
    }
    metrics.rnd_loss = rnd_->update_predictor(states, {}, steps);
  }

  updates_done_ += 1;
  return metrics;
}

namespace {

nlohmann::json net_to_json(const FeedForwardNet& net) {
  return {{"sizes", net.sizes}, {"weights", net.weights}, {"biases", net.biases}};
}

nlohmann::json table_adam_to_json(const TableAdam& opt) {
  return {{"step", opt.step}, {"m", opt.m}, {"v", opt.v}};
}

void table_adam_from_json(const nlohmann::json& j, TableAdam& opt) {
  opt.step = j.at("step").get<long>();
  opt.m = j.at("m").get<std::vector<double>>();
  opt.v = j.at("v").get<std::vector<double>>();
}

FeedForwardNet net_from_json(const nlohmann::json& j) {
  FeedForwardNet net;
  net.sizes = j.at("sizes").get<std::vector<int>>();
  net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  return net;
}

}  // namespace

std::string Agent::checkpoint_text() const {
  nlohmann::json j;
  j["format"] = "oppo-checkpoint";
  j["version"] = 1;
  j["variant"] = variant_name(cfg_.variant);
  j["num_states"] = mdp_->num_states;
  j["num_actions"] = mdp_->num_actions;
  j["logits"] = policy_.logits;
  j["v1"] = v1_;
  j["v2"] = v2_;
  j["opt_policy"] = table_adam_to_json(opt_policy_);
  j["opt_v1"] = table_adam_to_json(opt_v1_);
  j["opt_v2"] = table_adam_to_json(opt_v2_);
  j["visit_counts"] = visit_counts_;
  j["episode_return"] = episode_return_;
  j["total_env_steps"] = total_env_steps_;
  j["updates_done"] = updates_done_;
  j["rng_action"] = rng_action_.serialize();
  j["rng_shuffle"] = rng_shuffle_.serialize();
  nlohmann::json envs = nlohmann::json::array();
  for (const auto& env : envs_) {
    envs.push_back({{"state", env.state()}, {"time", env.time()}, {"rng", env.rng().serialize()}});
  }
  j["envs"] = envs;
  if (rnd_.has_value()) {
    long count = 0;
    double mean = 0.0, m2 = 0.0;
    rnd_->stats(count, mean, m2);
    nlohmann::json r;
    r["target"] = net_to_json(rnd_->target());
    r["predictor"] = net_to_json(rnd_->predictor());
    const AdamState& opt = rnd_->optimizer();
    r["adam"] = {{"lr", opt.lr},          {"beta1", opt.beta1},       {"beta2", opt.beta2},
                 {"eps", opt.eps},        {"step", opt.step},         {"m_weights", opt.m_weights},
                 {"v_weights", opt.v_weights}, {"m_biases", opt.m_biases}, {"v_biases", opt.v_biases}};
    r["stats"] = {{"count", count}, {"mean", mean}, {"m2", m2}};
    j["rnd"] = r;
  }
  return j.dump(2);
}

void Agent::restore_checkpoint_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format") != "oppo-checkpoint" || j.at("version") != 1) {
    throw std::invalid_argument("checkpoint: unsupported format/version");
  }
  if (j.at("num_states") != mdp_->num_states || j.at("num_actions") != mdp_->num_actions) {
    throw std::invalid_argument("checkpoint: MDP shape mismatch");
  }
  if (j.at("variant") != variant_name(cfg_.variant)) {
    throw std::invalid_argument("checkpoint: variant mismatch");
  }
  policy_.logits = j.at("logits").get<std::vector<double>>();
  v1_ = j.at("v1").get<std::vector<double>>();
  v2_ = j.at("v2").get<std::vector<double>>();
  table_adam_from_json(j.at("opt_policy"), opt_policy_);
  table_adam_from_json(j.at("opt_v1"), opt_v1_);
  table_adam_from_json(j.at("opt_v2"), opt_v2_);
  visit_counts_ = j.at("visit_counts").get<std::vector<std::int64_t>>();
  episode_return_ = j.at("episode_return").get<std::vector<double>>();
  total_env_steps_ = j.at("total_env_steps").get<long long>();
  updates_done_ = j.at("updates_done").get<long long>();
  rng_action_ = Rng::deserialize(j.at("rng_action").get<std::string>());
  rng_shuffle_ = Rng::deserialize(j.at("rng_shuffle").get<std::string>());
  const auto& envs = j.at("envs");
  if (envs.size() != envs_.size()) throw std::invalid_argument("checkpoint: actor count mismatch");
  for (std::size_t n = 0; n < envs_.size(); ++n) {
    envs_[n].restore(envs[n].at("state").get<int>(), envs[n].at("time").get<int>(),
                     Rng::deserialize(envs[n].at("rng").get<std::string>()));
  }
  if (uses_rnd()) {
    const auto& r = j.at("rnd");
    AdamState opt;
    const auto& adam = r.at("adam");
    opt.lr = adam.at("lr").get<double>();
    opt.beta1 = adam.at("beta1").get<double>();
    opt.beta2 = adam.at("beta2").get<double>();
    opt.eps = adam.at("eps").get<double>();
    opt.step = adam.at("step").get<long>();
    opt.m_weights = adam.at("m_weights").get<std::vector<std::vector<double>>>();
    opt.v_weights = adam.at("v_weights").get<std::vector<std::vector<double>>>();
    opt.m_biases = adam.at("m_biases").get<std::vector<std::vector<double>>>();
    opt.v_biases = adam.at("v_biases").get<std::vector<std::vector<double>>>();
    const auto& stats = r.at("stats");
    rnd_->restore(net_from_json(r.at("target")), net_from_json(r.at("predictor")), std::move(opt),
                  stats.at("count").get<long>(), stats.at("mean").get<double>(), stats.at("m2").get<double>());
  }
}

}  // namespace oppo

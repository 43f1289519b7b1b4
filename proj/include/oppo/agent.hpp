#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oppo/policy.hpp"
#include "oppo/rnd.hpp"
#include "oppo/rng.hpp"
#include "oppo/tabular_mdp.hpp"

namespace oppo {

enum class Variant { kPpo, kOppoExact, kOppoRnd, kRnd };

std::string variant_name(Variant v);
Variant variant_from_string(const std::string& name);

struct AgentConfig {
  Variant variant = Variant::kOppoExact;
  double beta = 0.5;
  double c = 0.01;
  double clip_epsilon = 0.1;
  double gamma = 0.99;
  double lambda = 0.95;
  int actors = 32;
  int steps_per_actor = 64;
  int epochs = 4;
  int minibatches = 4;
  double lr_policy = 0.01;
  double lr_value = 0.01;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  /// Aggregate the per-actor uncertainty estimates by sum instead of mean.
  bool eta2_sum = false;
  double rnd_lr = 1e-3;
  int rnd_hidden = 64;
  int rnd_output = 32;
  int rnd_predictor_extra_layers = 0;
  /// Predictor gradient steps per update at full intensity.
  int rnd_steps_per_update = 40;
  /// Horizon (in updates) over which the per-update step count ramps
  /// linearly from one to rnd_steps_per_update: light touch while counts
  /// are small, hard convergence once they are large. 0 trains at full
  /// intensity throughout; -1 lets the harness substitute the run length.
  int rnd_train_ramp_updates = -1;
  /// Updates to wait before the predictor starts training; keeps the very
  /// first batches' bonuses at their untrained scale.
  int rnd_train_delay_updates = 6;
  /// Horizon for annealing the predictor learning rate: full rate through
  /// the first half, linear to zero at the horizon. Kills the optimizer's
  /// late-run jitter floor. 0 disables; -1 substitutes the run length.
  int rnd_lr_anneal_updates = -1;
  bool rnd_normalize = false;
  int rnd_warmup = 100;

  void validate() const;
};

/// One rollout of `actors` streams, `steps` steps each, actor-major.
struct TrajectoryBatch {
  int actors = 0;
  int steps = 0;
  std::vector<int> state, action, next_state;
  std::vector<double> reward1;  // extrinsic
  std::vector<double> reward2;  // local uncertainty, >= 0
  std::vector<double> logp_old;
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> episode_start;
  std::vector<std::int64_t> next_count;    // visit count of next_state when it was entered
  std::vector<double> raw_bonus_next;      // filled for rnd-backed variants
  std::vector<double> episode_rewards_completed;

  std::size_t size() const { return static_cast<std::size_t>(actors) * steps; }
  std::size_t idx(int n, int h) const { return static_cast<std::size_t>(n) * steps + h; }
};

struct GaeResult {
  std::vector<double> advantage;
  std::vector<double> value_target;
};

/// Generalized advantage estimation over per-state values with the given
/// discount; truncates at done flags and bootstraps the stream tail with the
/// value of the state after the final step.
GaeResult gae(const TrajectoryBatch& batch, std::span<const double> state_values, std::span<const double> rewards,
              double discount, double lambda);

/// Mean (or sum) over actor streams of max(0, V2(s0) + A2(s0, a0)) at each
/// stream's first episode start; falls back to the stream's step 0 when no
/// episode starts inside the batch.
double eta2_estimate(const TrajectoryBatch& batch, std::span<const double> v2, std::span<const double> adv2,
                     bool aggregate_sum = false);

/// A1 + beta * A2 / sqrt(eta2 + c) with a single eta2 per update. beta = 0
/// short-circuits to A1.
std::vector<double> optimistic_advantage(std::span<const double> adv1, std::span<const double> adv2, double beta,
                                         double c, double eta2);

/// Empirical mean over `indices` of min(l * adv, clip(l, 1-eps, 1+eps) * adv)
/// with l the probability ratio against the sampling policy.
double clipped_objective(const PolicyTable& policy, const TrajectoryBatch& batch,
                         std::span<const std::size_t> indices, std::span<const double> advantage, double clip_epsilon,
                         double* clip_fraction = nullptr);

/// clipped_objective plus entropy_coef times the mean policy entropy over the
/// same samples. This is the logit-dependent part of the update objective.
double policy_objective(const PolicyTable& policy, const TrajectoryBatch& batch, std::span<const std::size_t> indices,
                        std::span<const double> advantage, double clip_epsilon, double entropy_coef);

/// Analytic gradient of policy_objective with respect to every logit.
void policy_objective_gradient(const PolicyTable& policy, const TrajectoryBatch& batch,
                               std::span<const std::size_t> indices, std::span<const double> advantage,
                               double clip_epsilon, double entropy_coef, std::span<double> grad_out,
                               double* clip_fraction = nullptr);

struct UpdateMetrics {
  double eta2 = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_reward2 = 0.0;
  double policy_objective_value = 0.0;
  double value_loss = 0.0;
  double rnd_loss = 0.0;
  int episodes_completed = 0;
  bool nan_abort = false;
};

/// Adaptive-moment ascent state for one flat parameter table.
struct TableAdam {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m, v;

  explicit TableAdam(std::size_t size = 0, double learning_rate = 1e-2)
      : lr(learning_rate), m(size, 0.0), v(size, 0.0) {}

  /// Moves params along `ascent_grad` (gradient of the objective to raise).
  void ascend(std::vector<double>& params, std::span<const double> ascent_grad);
};

/// Tabular policy-optimization agent over an immutable MDP. Collection runs
/// the actor streams on the serial reference schedule; all randomness flows
/// through named streams derived from the seed.
class Agent {
 public:
  Agent(const TabularMdp& mdp, const AgentConfig& config, std::uint64_t seed);

  TrajectoryBatch collect();
  UpdateMetrics update(const TrajectoryBatch& batch);

  const PolicyTable& policy() const { return policy_; }
  PolicyTable& mutable_policy() { return policy_; }
  const std::vector<double>& value_head1() const { return v1_; }
  const std::vector<double>& value_head2() const { return v2_; }
  std::vector<double>& mutable_value_head1() { return v1_; }
  std::vector<double>& mutable_value_head2() { return v2_; }
  const std::vector<std::int64_t>& state_visit_counts() const { return visit_counts_; }
  const std::optional<RndEstimator>& rnd() const { return rnd_; }
  const AgentConfig& config() const { return cfg_; }
  const TabularMdp& mdp() const { return *mdp_; }
  long long total_env_steps() const { return total_env_steps_; }
  long long updates_done() const { return updates_done_; }

  /// Versioned structured-text checkpoint of every piece of mutable state,
  /// including rng streams; restoring reproduces the continued run exactly.
  std::string checkpoint_text() const;
  void restore_checkpoint_text(const std::string& text);

 private:
  bool uses_rnd() const { return cfg_.variant == Variant::kOppoRnd || cfg_.variant == Variant::kRnd; }
  double bonus_for(int next_state, std::vector<double>& cache, std::vector<std::uint8_t>& cached) const;

  const TabularMdp* mdp_;
  AgentConfig cfg_;
  PolicyTable policy_;
  std::vector<double> v1_, v2_;
  TableAdam opt_policy_, opt_v1_, opt_v2_;
  std::optional<RndEstimator> rnd_;
  std::vector<std::int64_t> visit_counts_;
  std::vector<EpisodeSim> envs_;
  std::vector<double> episode_return_;
  Rng rng_action_;
  Rng rng_shuffle_;
  long long total_env_steps_ = 0;
  long long updates_done_ = 0;
};

}  // namespace oppo

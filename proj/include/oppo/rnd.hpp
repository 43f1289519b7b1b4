#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "oppo/net.hpp"
#include "oppo/rng.hpp"

namespace oppo {

struct RndConfig {
  int input_size = 0;
  int hidden_size = 64;
  int output_size = 32;
  /// Hidden layers the predictor carries beyond the target's single one.
  int predictor_extra_layers = 0;
  double lr = 1e-3;
  /// Gradient steps taken per update_predictor call.
  int steps_per_update = 1;
  bool normalize = false;
  int warmup_observations = 100;
};

/// Random network distillation: a frozen random target network and a trained
/// predictor; the squared output difference measures state novelty. The
/// predictor carries one extra hidden layer so it cannot express the target
/// exactly.
class RndEstimator {
 public:
  RndEstimator(const RndConfig& config, Rng& rng);
  RndEstimator(FeedForwardNet target, FeedForwardNet predictor, double lr = 1e-3);

  double raw_bonus(std::span<const double> observation) const;
  double raw_bonus_state(int state) const;

  /// raw_bonus scaled by the running standard deviation of raw bonuses.
  /// Returns the raw bonus during warm-up and when the running std is
  /// degenerate. Statistics advance only through update_predictor.
  double normalized_bonus(std::span<const double> observation) const;
  double normalized_bonus_state(int state) const;

  /// One adaptive step (per configured steps_per_update) on the mean squared
  /// output difference over the batch of state observations; multiplicity is
  /// carried by `counts` (empty means all ones). Running bonus statistics are
  /// fed the pre-update raw bonuses. Returns the pre-update mean loss.
  double update_predictor(std::span<const int> states, std::span<const long> counts = {}, int steps_override = 0);

  const FeedForwardNet& target() const { return target_; }
  const FeedForwardNet& predictor() const { return predictor_; }
  const AdamState& optimizer() const { return opt_; }
  void set_learning_rate(double lr) { opt_.lr = lr; }
  long observation_count() const { return obs_count_; }
  double running_std() const;
  const RndConfig& config() const { return config_; }

  /// Serialization hooks for checkpoints. The configured bonus mode is kept;
  /// only parameters, optimizer state and statistics are replaced.
  void restore(FeedForwardNet target, FeedForwardNet predictor, AdamState opt, long count, double mean, double m2) {
    if (target.input_size() != config_.input_size || predictor.input_size() != config_.input_size) {
      throw std::invalid_argument("RndEstimator::restore: input size mismatch");
    }
    target_ = std::move(target);
    predictor_ = std::move(predictor);
    opt_ = std::move(opt);
    obs_count_ = count;
    bonus_mean_ = mean;
    bonus_m2_ = m2;
  }
  void stats(long& count, double& mean, double& m2) const {
    count = obs_count_;
    mean = bonus_mean_;
    m2 = bonus_m2_;
  }

 private:
  double scale_bonus(double raw) const;

  RndConfig config_;
  FeedForwardNet target_;
  FeedForwardNet predictor_;
  AdamState opt_;
  long obs_count_ = 0;
  double bonus_mean_ = 0.0;
  double bonus_m2_ = 0.0;
};

}  // namespace oppo

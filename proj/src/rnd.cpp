#include "oppo/rnd.hpp"

#include <cmath>
#include <stdexcept>

namespace oppo {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

RndEstimator::RndEstimator(const RndConfig& config, Rng& rng) : config_(config) {
  if (config.input_size < 1) throw std::invalid_argument("RndEstimator: input_size must be positive");
  if (config.predictor_extra_layers < 0) throw std::invalid_argument("RndEstimator: bad predictor depth");
  target_ = make_net({config.input_size, config.hidden_size, config.output_size}, rng);
  std::vector<int> predictor_sizes{config.input_size};
  for (int i = 0; i <= config.predictor_extra_layers; ++i) predictor_sizes.push_back(config.hidden_size);
  predictor_sizes.push_back(config.output_size);
  predictor_ = make_net(predictor_sizes, rng);
  opt_ = make_adam(predictor_, config.lr);
}

RndEstimator::RndEstimator(FeedForwardNet target, FeedForwardNet predictor, double lr)
    : target_(std::move(target)), predictor_(std::move(predictor)) {
  if (target_.input_size() != predictor_.input_size() || target_.output_size() != predictor_.output_size()) {
    throw std::invalid_argument("RndEstimator: target/predictor shape mismatch");
  }
  config_.input_size = target_.input_size();
  config_.output_size = target_.output_size();
  config_.lr = lr;
  opt_ = make_adam(predictor_, lr);
}

double RndEstimator::raw_bonus(std::span<const double> observation) const {
  const auto t = forward(target_, observation);
  const auto p = forward(predictor_, observation);
  return squared_distance(t, p);
}

double RndEstimator::raw_bonus_state(int state) const {
  const auto t = forward_one_hot(target_, state);
  const auto p = forward_one_hot(predictor_, state);
  return squared_distance(t, p);
}

double RndEstimator::running_std() const {
  if (obs_count_ < 2) return 0.0;
  return std::sqrt(bonus_m2_ / static_cast<double>(obs_count_ - 1));
}

double RndEstimator::scale_bonus(double raw) const {
  if (!config_.normalize) return raw;
  if (obs_count_ < config_.warmup_observations) return raw;
  const double sd = running_std();
  if (sd < 1e-8) return raw;
  return raw / sd;
}

double RndEstimator::normalized_bonus(std::span<const double> observation) const {
  return scale_bonus(raw_bonus(observation));
}

double RndEstimator::normalized_bonus_state(int state) const { return scale_bonus(raw_bonus_state(state)); }

double RndEstimator::update_predictor(std::span<const int> states, std::span<const long> counts, int steps_override) {
  if (states.empty()) throw std::invalid_argument("update_predictor: empty batch");
  if (!counts.empty() && counts.size() != states.size()) {
    throw std::invalid_argument("update_predictor: counts size mismatch");
  }
  double total_weight = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    total_weight += counts.empty() ? 1.0 : static_cast<double>(counts[i]);
  }
  double mean_loss = 0.0;
  const int steps = steps_override > 0 ? steps_override : std::max(1, config_.steps_per_update);
  for (int step = 0; step < steps; ++step) {
    NetGradients grads = zero_gradients(predictor_);
    double loss = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      const double weight = (counts.empty() ? 1.0 : static_cast<double>(counts[i])) / total_weight;
      const auto input = one_hot(states[i], predictor_.input_size());
      const auto t_out = forward_one_hot(target_, states[i]);
      const ForwardTrace trace = forward_trace(predictor_, input);
      const auto& p_out = trace.post.back();
      double sample_loss = 0.0;
      std::vector<double> output_grad(p_out.size());
      for (std::size_t k = 0; k < p_out.size(); ++k) {
        const double diff = p_out[k] - t_out[k];
        sample_loss += diff * diff;
        output_grad[k] = 2.0 * diff;
      }
      loss += weight * sample_loss;
      backward(predictor_, trace, output_grad, grads, weight);
      if (step == 0) {
        // Running statistics see each raw observation once, pre-update.
        const long reps = counts.empty() ? 1 : counts[i];
        for (long r = 0; r < reps; ++r) {
          obs_count_ += 1;
          const double delta = sample_loss - bonus_mean_;
          bonus_mean_ += delta / static_cast<double>(obs_count_);
          bonus_m2_ += delta * (sample_loss - bonus_mean_);
        }
      }
    }
    if (step == 0) mean_loss = loss;
    adam_update(predictor_, opt_, grads);
  }
  return mean_loss;
}

}  // namespace oppo

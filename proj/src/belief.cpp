#include "oppo/belief.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oppo {

BeliefState::BeliefState(const TabularMdp& truth, double sigma_r2, BeliefOptions options) {
  truth.validate();
  if (!(sigma_r2 >= 0.0)) throw std::invalid_argument("BeliefState: sigma_r2 must be non-negative");
  if (!(options.prior_unit_mass > 0.0)) throw std::invalid_argument("BeliefState: prior mass must be positive");
  num_states_ = truth.num_states;
  num_actions_ = truth.num_actions;
  horizon_ = truth.horizon;
  sigma_r2_ = sigma_r2;
  prior_mean_ = options.reward_prior_mean;
  prior_var_ = std::isnan(options.reward_prior_variance) ? 10.0 * sigma_r2 : options.reward_prior_variance;
  // A zero prior variance is only meaningful when rewards carry no noise.
  if (!(prior_var_ > 0.0) && !(sigma_r2 == 0.0 && prior_var_ == 0.0)) {
    throw std::invalid_argument("BeliefState: reward prior variance must be positive");
  }
  if (std::isnan(options.q_max)) {
    double max_abs = 0.0;
    for (double m : truth.reward_mean) max_abs = std::max(max_abs, std::abs(m));
    q_max_ = truth.horizon * max_abs;
  } else {
    if (!(options.q_max >= 0.0)) throw std::invalid_argument("BeliefState: q_max must be non-negative");
    q_max_ = options.q_max;
  }
  initial_dist_ = truth.initial_dist;
  terminal_ = truth.terminal;

  const int sa_count = num_states_ * num_actions_;
  support_.resize(sa_count);
  alpha_.resize(sa_count);
  n_sa_.assign(sa_count, 0);
  reward_sum_.assign(sa_count, 0.0);
  n_next_.assign(num_states_, 0);
  for (int s = 0; s < num_states_; ++s) {
    for (int a = 0; a < num_actions_; ++a) {
      auto row = truth.row(s, a);
      auto& sup = support_[sa(s, a)];
      for (int s_next = 0; s_next < num_states_; ++s_next) {
        if (row[s_next] > 0.0) sup.push_back(s_next);
      }
      alpha_[sa(s, a)].assign(sup.size(), options.prior_unit_mass);
    }
  }
}

void BeliefState::check_indices(int s, int a) const {
  if (s < 0 || s >= num_states_ || a < 0 || a >= num_actions_) {
    throw std::invalid_argument("BeliefState: state/action index out of range");
  }
}

void BeliefState::observe(const Transition& t) {
  check_indices(t.state, t.action);
  if (t.next_state < 0 || t.next_state >= num_states_) {
    throw std::invalid_argument("BeliefState: successor index out of range");
  }
  const int idx = sa(t.state, t.action);
  const auto& sup = support_[idx];
  const auto it = std::find(sup.begin(), sup.end(), t.next_state);
  if (it == sup.end()) throw std::invalid_argument("BeliefState: successor outside the known support");
  alpha_[idx][it - sup.begin()] += 1.0;
  n_sa_[idx] += 1;
  reward_sum_[idx] += t.reward;
  n_next_[t.next_state] += 1;
}

double BeliefState::alpha_total(int s, int a) const {
  double total = 0.0;
  for (double v : alpha_[sa(s, a)]) total += v;
  return total;
}

double BeliefState::posterior_reward_mean(int s, int a) const {
  check_indices(s, a);
  const int idx = sa(s, a);
  const auto n = static_cast<double>(n_sa_[idx]);
  if (std::isinf(prior_var_)) {
    return n > 0 ? reward_sum_[idx] / n : prior_mean_;
  }
  if (sigma_r2_ == 0.0) return n > 0 ? reward_sum_[idx] / n : prior_mean_;
  const double precision = 1.0 / prior_var_ + n / sigma_r2_;
  return (prior_mean_ / prior_var_ + reward_sum_[idx] / sigma_r2_) / precision;
}

double BeliefState::posterior_reward_var(int s, int a) const {
  check_indices(s, a);
  const auto n = static_cast<double>(n_sa_[sa(s, a)]);
  if (sigma_r2_ == 0.0) return n > 0 ? 0.0 : prior_var_;
  if (std::isinf(prior_var_)) {
    return n > 0 ? sigma_r2_ / n : prior_var_;
  }
  return 1.0 / (1.0 / prior_var_ + n / sigma_r2_);
}

double BeliefState::local_uncertainty_nu(int s, int a) const {
  check_indices(s, a);
  const auto k = static_cast<double>(support_[sa(s, a)].size());
  if (k < 1.0) throw std::logic_error("BeliefState: empty transition support");
  const double a0 = alpha_total(s, a);
  const double transition_term = (k - 1.0) / (a0 + 1.0);
  return posterior_reward_var(s, a) + q_max_ * q_max_ * transition_term;
}

double BeliefState::cu_bound(int s, int a, double c_u) const {
  check_indices(s, a);
  if (!(c_u > 0.0)) throw std::invalid_argument("cu_bound: c_u must be positive");
  return c_u / static_cast<double>(std::max<std::int64_t>(n_sa_[sa(s, a)], 1));
}

double BeliefState::next_state_count_bonus(int s_next) const {
  if (s_next < 0 || s_next >= num_states_) throw std::invalid_argument("BeliefState: state index out of range");
  return 1.0 / static_cast<double>(std::max<std::int64_t>(n_next_[s_next], 1));
}

std::vector<double> BeliefState::posterior_transition_row(int s, int a) const {
  check_indices(s, a);
  const int idx = sa(s, a);
  std::vector<double> row(num_states_, 0.0);
  const double a0 = alpha_total(s, a);
  for (std::size_t i = 0; i < support_[idx].size(); ++i) {
    row[support_[idx][i]] = alpha_[idx][i] / a0;
  }
  return row;
}

TabularMdp BeliefState::sample_mdp(Rng& rng) const {
  TabularMdp mdp;
  mdp.num_states = num_states_;
  mdp.num_actions = num_actions_;
  mdp.horizon = horizon_;
  const std::size_t sa_count = static_cast<std::size_t>(num_states_) * num_actions_;
  mdp.transition.assign(sa_count * num_states_, 0.0);
  mdp.reward_mean.assign(sa_count, 0.0);
  mdp.reward_std.assign(sa_count, 0.0);
  mdp.initial_dist = initial_dist_;
  mdp.terminal = terminal_;
  std::vector<double> draws;
  for (int s = 0; s < num_states_; ++s) {
    for (int a = 0; a < num_actions_; ++a) {
      const int idx = sa(s, a);
      const auto& sup = support_[idx];
      draws.resize(sup.size());
      double total = 0.0;
      for (std::size_t i = 0; i < sup.size(); ++i) {
        draws[i] = rng.gamma(alpha_[idx][i]);
        total += draws[i];
      }
      auto row = mdp.row(s, a);
      if (sup.size() == 1) {
        row[sup[0]] = 1.0;
      } else {
        for (std::size_t i = 0; i < sup.size(); ++i) row[sup[i]] = draws[i] / total;
      }
      const double var = posterior_reward_var(s, a);
      const double mean = posterior_reward_mean(s, a);
      mdp.reward_mean[idx] = var > 0.0 ? rng.normal(mean, std::sqrt(var)) : mean;
    }
  }
  return mdp;
}

}  // namespace oppo

#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "oppo/rng.hpp"
#include "oppo/tabular_mdp.hpp"

namespace oppo {

struct BeliefOptions {
  /// Dirichlet prior mass placed on each reachable successor.
  double prior_unit_mass = 1.0;
  /// Gaussian prior over each mean reward. An infinite variance selects the
  /// improper flat prior (posterior mean = sample mean).
  double reward_prior_mean = 0.0;
  /// Defaults to 10 * sigma_r^2 when NaN.
  double reward_prior_variance = std::numeric_limits<double>::quiet_NaN();
  /// Bound on Q-values used in the local uncertainty. Defaults to
  /// horizon * max |reward_mean| of the ground truth when NaN.
  double q_max = std::numeric_limits<double>::quiet_NaN();
};

/// Bayesian posterior over rewards (Gaussian, known observation variance)
/// and transitions (Dirichlet over the true one-step support), plus visit
/// counters. Single writer; concurrent reads are safe between updates.
class BeliefState {
 public:
  BeliefState(const TabularMdp& truth, double sigma_r2, BeliefOptions options = {});

  void observe(const Transition& t);

  /// Local uncertainty: posterior reward variance plus q_max^2 times the
  /// summed relative transition variance, which for a Dirichlet row with
  /// support size K and total mass a0 collapses to (K - 1) / (a0 + 1).
  double local_uncertainty_nu(int s, int a) const;

  /// Count-based surrogate c_u / max(n_sa, 1).
  double cu_bound(int s, int a, double c_u) const;

  /// 1 / max(n_next, 1) for the given successor state.
  double next_state_count_bonus(int s_next) const;

  /// Draws one (reward, transition) model from the posterior. Sampled reward
  /// stds are zero: the draw is a candidate mean-reward function.
  TabularMdp sample_mdp(Rng& rng) const;

  double posterior_reward_mean(int s, int a) const;
  double posterior_reward_var(int s, int a) const;
  /// Posterior mean transition row (alpha / sum alpha on the support).
  std::vector<double> posterior_transition_row(int s, int a) const;

  int support_size(int s, int a) const { return static_cast<int>(support_[sa(s, a)].size()); }
  double alpha_total(int s, int a) const;
  std::int64_t visit_count(int s, int a) const { return n_sa_[sa(s, a)]; }
  std::int64_t next_state_count(int s_next) const { return n_next_[s_next]; }

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int horizon() const { return horizon_; }
  double sigma_r2() const { return sigma_r2_; }
  double q_max() const { return q_max_; }
  const std::vector<double>& initial_dist() const { return initial_dist_; }
  const std::vector<std::uint8_t>& terminal() const { return terminal_; }
  const std::vector<int>& support(int s, int a) const { return support_[sa(s, a)]; }

 private:
  int sa(int s, int a) const { return s * num_actions_ + a; }
  void check_indices(int s, int a) const;

  int num_states_ = 0;
  int num_actions_ = 0;
  int horizon_ = 0;
  double sigma_r2_ = 0.0;
  double q_max_ = 0.0;
  double prior_mean_ = 0.0;
  double prior_var_ = 0.0;
  std::vector<double> initial_dist_;
  std::vector<std::uint8_t> terminal_;
  std::vector<std::vector<int>> support_;    // [sa] -> successor state ids
  std::vector<std::vector<double>> alpha_;   // [sa] -> Dirichlet parameters
  std::vector<std::int64_t> n_sa_;
  std::vector<double> reward_sum_;
  std::vector<std::int64_t> n_next_;
};

}  // namespace oppo

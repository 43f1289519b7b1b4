#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oppo/belief.hpp"
#include "oppo/rng.hpp"
#include "oppo/tabular_mdp.hpp"

namespace oppo {

/// Inputs to the exact solvers: posterior-mean transitions and rewards plus
/// the local uncertainty attached to each (state, action).
struct MeanModel {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> transition;  // [s * A + a] -> row over states
  std::vector<double> reward;      // [s * A + a]
  std::vector<double> nu;          // [s * A + a], >= 0
  std::vector<double> initial_dist;
  std::vector<std::uint8_t> terminal;

  int sa(int s, int a) const { return s * num_actions + a; }
  std::span<const double> row(int s, int a) const {
    return std::span<const double>(transition).subspan(static_cast<std::size_t>(sa(s, a)) * num_states, num_states);
  }
  void validate() const;
};

/// Posterior-mean model of a belief; nu_scale exists for mutation testing
/// of the variance bound.
MeanModel mean_model(const BeliefState& belief, double nu_scale = 1.0);

/// Deterministic view of a concrete MDP (zero local uncertainty); solving it
/// yields the exact action values of that MDP.
MeanModel point_model(const TabularMdp& mdp);

/// Backward-induction tables. Layer h = 0..horizon-1 are the action layers,
/// aligned with the simulator's step index; layer `horizon` is the stored
/// zero boundary. eta values are taken at layer 0 under the initial
/// distribution.
struct UbeSolution {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> q1, q2;  // [(H+1) * S * A]
  std::vector<double> v1, v2;  // [(H+1) * S]
  std::vector<double> a1, a2;  // [(H+1) * S * A]
  double eta1 = 0.0;
  double eta2 = 0.0;
  double eta_tilde = 0.0;
  double beta = 0.0;
  double c = 0.0;

  std::size_t qidx(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * num_states + s) * num_actions + a;
  }
  std::size_t vidx(int h, int s) const { return static_cast<std::size_t>(h) * num_states + s; }
};

/// Solves the mean value recursion (head 1, reward) and the uncertainty
/// recursion (head 2, nu) for a fixed policy, then forms
/// eta_tilde = eta1 + 2 * beta * sqrt(eta2 + c).
UbeSolution solve(const MeanModel& model, std::span<const double> policy, double beta, double c);

/// Per-layer action-value tables for an arbitrary per-(s,a) reward; layer
/// `horizon` is the zero boundary. Terminal states pin to zero.
std::vector<double> solve_action_values(const MeanModel& model, std::span<const double> per_sa_reward,
                                        std::span<const double> policy);

/// Probability of taking an action from state s at step h; mass entering a
/// terminal state leaves the table.
struct OccupancyTable {
  int num_states = 0;
  int horizon = 0;
  std::vector<double> rho;  // [(H+1) * S]
  double at(int h, int s) const { return rho[static_cast<std::size_t>(h) * num_states + s]; }
};

OccupancyTable occupancy(const MeanModel& model, std::span<const double> policy);

/// First-order surrogate of the optimistic value of `policy_prime` around
/// the solved policy: eta_tilde + sum_h,s,a rho_h(s) pi'(a|s)
/// (A1 + beta * A2 / sqrt(eta2 + c)). Advantages, occupancy and eta2 stay
/// frozen at the solved policy.
double surrogate_value(const UbeSolution& solution, const OccupancyTable& occ, std::span<const double> policy_prime,
                       double beta, double c);

struct CheckReport {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
};

std::string format_report_line(const CheckReport& report);

/// Monte-Carlo check that the uncertainty head upper-bounds the posterior
/// variance of sampled action values, pointwise over (h, s, a).
/// statistic = max(empirical variance - q2 - 3 * SE); PASS iff <= 0.
CheckReport verify_theorem1(const BeliefState& belief, std::span<const double> policy, int samples, Rng& rng,
                            double nu_scale = 1.0);

/// Scalar version at the level of the policy value, plus the convexity step
/// var(eta_hat) <= sum rho pi var(Q0) checked on the same samples.
CheckReport verify_corollary1(const BeliefState& belief, std::span<const double> policy, int samples, Rng& rng,
                              double nu_scale = 1.0);

/// Finite-difference check that the surrogate's gradient in the candidate
/// policy matches the gradient of the exact optimistic value at the anchor,
/// and that the two values agree at the anchor itself.
struct Theorem2Report {
  double value_gap = 0.0;
  double grad_gap = 0.0;
  double grad_threshold = 0.0;
  bool pass = false;
};

Theorem2Report verify_theorem2(const MeanModel& model, std::span<const double> logits, double beta, double c,
                               double fd_step);

/// Exact evaluation of both sides of
/// eta_i(pi') - eta_i(pi) = sum_h,s,a rho^pi'_h(s) pi'(a|s) A_i^pi(h,s,a).
CheckReport policy_difference_identity_check(const MeanModel& model, std::span<const double> policy,
                                             std::span<const double> policy_prime);

}  // namespace oppo

#include "oppo/ube.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "oppo/policy.hpp"

namespace oppo {

namespace {

constexpr double kRowSumTolerance = 1e-9;

void check_stochastic(std::span<const double> row, const char* what) {
  double sum = 0.0;
  for (double p : row) {
    if (p < 0.0) throw std::invalid_argument(std::string(what) + ": negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) {
    throw std::invalid_argument(std::string(what) + ": row does not sum to 1");
  }
}

void check_policy(std::span<const double> policy, int num_states, int num_actions) {
  if (policy.size() != static_cast<std::size_t>(num_states) * num_actions) {
    throw std::invalid_argument("policy table size mismatch");
  }
  for (int s = 0; s < num_states; ++s) {
    check_stochastic(policy.subspan(static_cast<std::size_t>(s) * num_actions, num_actions), "policy");
  }
}

/// Accumulates the first four moments of a stream, shifted by the first
/// observation to keep the central-moment algebra well conditioned.
struct MomentAccumulator {
  double shift = 0.0;
  double p1 = 0.0, p2 = 0.0, p3 = 0.0, p4 = 0.0;
  long count = 0;

  void add(double x) {
    if (count == 0) shift = x;
    const double d = x - shift;
    const double d2 = d * d;
    p1 += d;
    p2 += d2;
    p3 += d2 * d;
    p4 += d2 * d2;
    ++count;
  }

  /// Unbiased sample variance.
  double variance() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double mean = p1 / n;
    const double m2 = std::max(0.0, p2 / n - mean * mean);
    return m2 * n / (n - 1.0);
  }

  /// Large-sample standard error of the sample variance, via the fourth
  /// central moment.
  double variance_se() const {
    if (count < 4) return 0.0;
    const double n = static_cast<double>(count);
    const double mean = p1 / n;
    const double m2 = std::max(0.0, p2 / n - mean * mean);
    const double m4 =
        p4 / n - 4.0 * mean * (p3 / n) + 6.0 * mean * mean * (p2 / n) - 3.0 * mean * mean * mean * mean;
    const double s2 = m2 * n / (n - 1.0);
    const double var_of_var = std::max(0.0, m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
    return std::sqrt(var_of_var);
  }
};

}  // namespace

void MeanModel::validate() const {
  if (num_states < 1 || num_actions < 1 || horizon < 1) {
    throw std::invalid_argument("MeanModel: bad dimensions");
  }
  const std::size_t sa_count = static_cast<std::size_t>(num_states) * num_actions;
  if (transition.size() != sa_count * num_states || reward.size() != sa_count || nu.size() != sa_count ||
      initial_dist.size() != static_cast<std::size_t>(num_states) ||
      terminal.size() != static_cast<std::size_t>(num_states)) {
    throw std::invalid_argument("MeanModel: table size mismatch");
  }
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) check_stochastic(row(s, a), "MeanModel transition");
  }
  check_stochastic(initial_dist, "MeanModel initial distribution");
  for (double v : nu) {
    if (v < 0.0) throw std::invalid_argument("MeanModel: negative local uncertainty");
  }
}

MeanModel mean_model(const BeliefState& belief, double nu_scale) {
  MeanModel model;
  model.num_states = belief.num_states();
  model.num_actions = belief.num_actions();
  model.horizon = belief.horizon();
  const std::size_t sa_count = static_cast<std::size_t>(model.num_states) * model.num_actions;
  model.transition.assign(sa_count * model.num_states, 0.0);
  model.reward.assign(sa_count, 0.0);
  model.nu.assign(sa_count, 0.0);
  model.initial_dist = belief.initial_dist();
  model.terminal = belief.terminal();
  for (int s = 0; s < model.num_states; ++s) {
    for (int a = 0; a < model.num_actions; ++a) {
      const auto row = belief.posterior_transition_row(s, a);
      std::copy(row.begin(), row.end(),
                model.transition.begin() + static_cast<std::size_t>(model.sa(s, a)) * model.num_states);
      model.reward[model.sa(s, a)] = belief.posterior_reward_mean(s, a);
      model.nu[model.sa(s, a)] = nu_scale * belief.local_uncertainty_nu(s, a);
    }
  }
  return model;
}

MeanModel point_model(const TabularMdp& mdp) {
  MeanModel model;
  model.num_states = mdp.num_states;
  model.num_actions = mdp.num_actions;
  model.horizon = mdp.horizon;
  model.transition = mdp.transition;
  model.reward = mdp.reward_mean;
  model.nu.assign(mdp.reward_mean.size(), 0.0);
  model.initial_dist = mdp.initial_dist;
  model.terminal = mdp.terminal;
  return model;
}

std::vector<double> solve_action_values(const MeanModel& model, std::span<const double> per_sa_reward,
                                        std::span<const double> policy) {
  const int S = model.num_states;
  const int A = model.num_actions;
  const int H = model.horizon;
  std::vector<double> q(static_cast<std::size_t>(H + 1) * S * A, 0.0);
  std::vector<double> v_next(S, 0.0);
  std::vector<double> v_here(S, 0.0);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double v = 0.0;
      if (!model.terminal[s]) {
        for (int a = 0; a < A; ++a) {
          const auto row = model.row(s, a);
          double backup = per_sa_reward[model.sa(s, a)];
          for (int s_next = 0; s_next < S; ++s_next) {
            if (row[s_next] > 0.0) backup += row[s_next] * v_next[s_next];
          }
          q[(static_cast<std::size_t>(h) * S + s) * A + a] = backup;
          v += policy[static_cast<std::size_t>(s) * A + a] * backup;
        }
      }
      v_here[s] = v;
    }
    std::swap(v_next, v_here);
  }
  return q;
}

UbeSolution solve(const MeanModel& model, std::span<const double> policy, double beta, double c) {
  model.validate();
  check_policy(policy, model.num_states, model.num_actions);
  if (beta < 0.0) throw std::invalid_argument("solve: beta must be non-negative");
  if (c < 0.0) throw std::invalid_argument("solve: c must be non-negative");

  UbeSolution sol;
  sol.num_states = model.num_states;
  sol.num_actions = model.num_actions;
  sol.horizon = model.horizon;
  sol.beta = beta;
  sol.c = c;
  sol.q1 = solve_action_values(model, model.reward, policy);
  sol.q2 = solve_action_values(model, model.nu, policy);

  const int S = model.num_states;
  const int A = model.num_actions;
  const int H = model.horizon;
  sol.v1.assign(static_cast<std::size_t>(H + 1) * S, 0.0);
  sol.v2.assign(static_cast<std::size_t>(H + 1) * S, 0.0);
  sol.a1.assign(sol.q1.size(), 0.0);
  sol.a2.assign(sol.q2.size(), 0.0);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      double v1 = 0.0, v2 = 0.0;
      for (int a = 0; a < A; ++a) {
        const double pi = policy[static_cast<std::size_t>(s) * A + a];
        v1 += pi * sol.q1[sol.qidx(h, s, a)];
        v2 += pi * sol.q2[sol.qidx(h, s, a)];
      }
      sol.v1[sol.vidx(h, s)] = v1;
      sol.v2[sol.vidx(h, s)] = v2;
      for (int a = 0; a < A; ++a) {
        sol.a1[sol.qidx(h, s, a)] = sol.q1[sol.qidx(h, s, a)] - v1;
        sol.a2[sol.qidx(h, s, a)] = sol.q2[sol.qidx(h, s, a)] - v2;
      }
    }
  }
  for (int s = 0; s < S; ++s) {
    sol.eta1 += model.initial_dist[s] * sol.v1[sol.vidx(0, s)];
    sol.eta2 += model.initial_dist[s] * sol.v2[sol.vidx(0, s)];
  }
  sol.eta_tilde = sol.eta1 + 2.0 * beta * std::sqrt(std::max(0.0, sol.eta2 + c));
  return sol;
}

OccupancyTable occupancy(const MeanModel& model, std::span<const double> policy) {
  model.validate();
  check_policy(policy, model.num_states, model.num_actions);
  const int S = model.num_states;
  const int A = model.num_actions;
  const int H = model.horizon;
  OccupancyTable occ;
  occ.num_states = S;
  occ.horizon = H;
  occ.rho.assign(static_cast<std::size_t>(H + 1) * S, 0.0);
  for (int s = 0; s < S; ++s) {
    if (!model.terminal[s]) occ.rho[s] = model.initial_dist[s];
  }
  const auto layers = enumerate_dag_layers(S, A, H, model.transition, model.initial_dist, model.terminal);
  for (int h = 0; h < H; ++h) {
    for (int s : layers[h]) {
      const double mass = occ.rho[static_cast<std::size_t>(h) * S + s];
      if (mass <= 0.0 || model.terminal[s]) continue;
      for (int a = 0; a < A; ++a) {
        const double pa = mass * policy[static_cast<std::size_t>(s) * A + a];
        if (pa <= 0.0) continue;
        const auto row = model.row(s, a);
        for (int s_next = 0; s_next < S; ++s_next) {
          if (row[s_next] > 0.0 && !model.terminal[s_next]) {
            occ.rho[(static_cast<std::size_t>(h) + 1) * S + s_next] += pa * row[s_next];
          }
        }
      }
    }
  }
  return occ;
}

double surrogate_value(const UbeSolution& solution, const OccupancyTable& occ, std::span<const double> policy_prime,
                       double beta, double c) {
  check_policy(policy_prime, solution.num_states, solution.num_actions);
  if (occ.num_states != solution.num_states || occ.horizon != solution.horizon) {
    throw std::invalid_argument("surrogate_value: occupancy does not match solution");
  }
  double uncertainty_scale = 0.0;
  if (beta != 0.0) {
    const double shifted = solution.eta2 + c;
    if (!(shifted > 0.0)) throw std::invalid_argument("surrogate_value: eta2 + c must be positive");
    uncertainty_scale = beta / std::sqrt(shifted);
  }
  const double eta_tilde = solution.eta1 + 2.0 * beta * std::sqrt(std::max(0.0, solution.eta2 + c));
  double correction = 0.0;
  const int S = solution.num_states;
  const int A = solution.num_actions;
  for (int h = 0; h < solution.horizon; ++h) {
    for (int s = 0; s < S; ++s) {
      const double mass = occ.at(h, s);
      if (mass <= 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double adv =
            solution.a1[solution.qidx(h, s, a)] + uncertainty_scale * solution.a2[solution.qidx(h, s, a)];
        correction += mass * policy_prime[static_cast<std::size_t>(s) * A + a] * adv;
      }
    }
  }
  return eta_tilde + correction;
}

std::string format_report_line(const CheckReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-24s statistic=%+.6e threshold=%+.6e %s%s%s", report.name.c_str(),
                report.statistic, report.threshold, report.pass ? "PASS" : "FAIL",
                report.detail.empty() ? "" : "  ", report.detail.c_str());
  return buf;
}

CheckReport verify_theorem1(const BeliefState& belief, std::span<const double> policy, int samples, Rng& rng,
                            double nu_scale) {
  if (samples < 2) throw std::invalid_argument("verify_theorem1: needs at least 2 samples");
  const MeanModel model = mean_model(belief, nu_scale);
  const UbeSolution sol = solve(model, policy, 0.0, 0.0);
  const int S = model.num_states;
  const int A = model.num_actions;
  const int H = model.horizon;
  std::vector<MomentAccumulator> acc(static_cast<std::size_t>(H) * S * A);
  const std::uint64_t base = rng.next_u64();
  for (int m = 0; m < samples; ++m) {
    Rng sample_rng = Rng::stream(base, static_cast<std::uint64_t>(m));
    const TabularMdp draw = belief.sample_mdp(sample_rng);
    const MeanModel pm = point_model(draw);
    const std::vector<double> qhat = solve_action_values(pm, pm.reward, policy);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i].add(qhat[i]);
  }
  CheckReport report;
  report.name = "theorem1";
  report.threshold = 0.0;
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_idx = 0;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double slack = acc[i].variance() - sol.q2[i] - 3.0 * acc[i].variance_se();
    if (slack > worst) {
      worst = slack;
      worst_idx = i;
    }
  }
  report.statistic = worst;
  report.pass = worst <= 0.0;
  const int a = static_cast<int>(worst_idx) % A;
  const int s = (static_cast<int>(worst_idx) / A) % S;
  const int h = static_cast<int>(worst_idx) / (S * A);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst(h=%d,s=%d,a=%d) var=%.6e q2=%.6e", h, s, a, acc[worst_idx].variance(),
                sol.q2[worst_idx]);
  report.detail = buf;
  return report;
}

CheckReport verify_corollary1(const BeliefState& belief, std::span<const double> policy, int samples, Rng& rng,
                              double nu_scale) {
  if (samples < 2) throw std::invalid_argument("verify_corollary1: needs at least 2 samples");
  const MeanModel model = mean_model(belief, nu_scale);
  const UbeSolution sol = solve(model, policy, 0.0, 0.0);
  const int S = model.num_states;
  const int A = model.num_actions;
  MomentAccumulator eta_acc;
  std::vector<MomentAccumulator> q0_acc(static_cast<std::size_t>(S) * A);
  const std::uint64_t base = rng.next_u64();
  for (int m = 0; m < samples; ++m) {
    Rng sample_rng = Rng::stream(base, static_cast<std::uint64_t>(m));
    const TabularMdp draw = belief.sample_mdp(sample_rng);
    const MeanModel pm = point_model(draw);
    const std::vector<double> qhat = solve_action_values(pm, pm.reward, policy);
    double eta_hat = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double q0 = qhat[static_cast<std::size_t>(s) * A + a];
        eta_hat += model.initial_dist[s] * policy[static_cast<std::size_t>(s) * A + a] * q0;
        q0_acc[static_cast<std::size_t>(s) * A + a].add(q0);
      }
    }
    eta_acc.add(eta_hat);
  }
  const double var_eta = eta_acc.variance();
  double jensen_rhs = 0.0;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      jensen_rhs +=
          model.initial_dist[s] * policy[static_cast<std::size_t>(s) * A + a] * q0_acc[static_cast<std::size_t>(s) * A + a].variance();
    }
  }
  CheckReport report;
  report.name = "corollary1";
  report.threshold = 0.0;
  report.statistic = var_eta - sol.eta2 - 3.0 * eta_acc.variance_se();
  const bool jensen_ok = var_eta <= jensen_rhs + 1e-9 * std::max(1.0, jensen_rhs);
  report.pass = report.statistic <= 0.0 && jensen_ok;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "var_eta=%.6e eta2=%.6e jensen_rhs=%.6e%s", var_eta, sol.eta2, jensen_rhs,
                jensen_ok ? "" : " JENSEN-VIOLATION");
  report.detail = buf;
  return report;
}

Theorem2Report verify_theorem2(const MeanModel& model, std::span<const double> logits, double beta, double c,
                               double fd_step) {
  if (!(fd_step > 0.0)) throw std::invalid_argument("verify_theorem2: fd_step must be positive");
  const int S = model.num_states;
  const int A = model.num_actions;
  PolicyTable anchor;
  anchor.num_states = S;
  anchor.num_actions = A;
  anchor.logits.assign(logits.begin(), logits.end());
  const std::vector<double> pi_anchor = anchor.probabilities();
  const UbeSolution sol = solve(model, pi_anchor, beta, c);
  if (!(sol.eta2 + c > 0.0)) throw std::invalid_argument("verify_theorem2: eta2 + c must be positive");
  const OccupancyTable occ = occupancy(model, pi_anchor);

  Theorem2Report report;
  report.value_gap = std::abs(surrogate_value(sol, occ, pi_anchor, beta, c) - sol.eta_tilde);

  PolicyTable probe = anchor;
  double grad_gap = 0.0;
  for (std::size_t k = 0; k < probe.logits.size(); ++k) {
    const double saved = probe.logits[k];
    probe.logits[k] = saved + fd_step;
    const std::vector<double> pi_plus = probe.probabilities();
    const double surrogate_plus = surrogate_value(sol, occ, pi_plus, beta, c);
    const double exact_plus = solve(model, pi_plus, beta, c).eta_tilde;
    probe.logits[k] = saved - fd_step;
    const std::vector<double> pi_minus = probe.probabilities();
    const double surrogate_minus = surrogate_value(sol, occ, pi_minus, beta, c);
    const double exact_minus = solve(model, pi_minus, beta, c).eta_tilde;
    probe.logits[k] = saved;
    const double g_surrogate = (surrogate_plus - surrogate_minus) / (2.0 * fd_step);
    const double g_exact = (exact_plus - exact_minus) / (2.0 * fd_step);
    grad_gap = std::max(grad_gap, std::abs(g_surrogate - g_exact));
  }
  report.grad_gap = grad_gap;
  report.grad_threshold = 100.0 * fd_step * fd_step + 1e-7;
  report.pass = report.value_gap <= 1e-10 && report.grad_gap <= report.grad_threshold;
  return report;
}

CheckReport policy_difference_identity_check(const MeanModel& model, std::span<const double> policy,
                                             std::span<const double> policy_prime) {
  const UbeSolution sol_pi = solve(model, policy, 0.0, 0.0);
  const UbeSolution sol_pp = solve(model, policy_prime, 0.0, 0.0);
  const OccupancyTable occ_pp = occupancy(model, policy_prime);
  const int S = model.num_states;
  const int A = model.num_actions;
  double max_gap = 0.0;
  for (int head = 1; head <= 2; ++head) {
    const auto& adv = head == 1 ? sol_pi.a1 : sol_pi.a2;
    const double lhs = (head == 1 ? sol_pp.eta1 - sol_pi.eta1 : sol_pp.eta2 - sol_pi.eta2);
    double rhs = 0.0;
    for (int h = 0; h < model.horizon; ++h) {
      for (int s = 0; s < S; ++s) {
        const double mass = occ_pp.at(h, s);
        if (mass <= 0.0) continue;
        for (int a = 0; a < A; ++a) {
          rhs += mass * policy_prime[static_cast<std::size_t>(s) * A + a] * adv[sol_pi.qidx(h, s, a)];
        }
      }
    }
    max_gap = std::max(max_gap, std::abs(lhs - rhs));
  }
  CheckReport report;
  report.name = "policy_difference";
  report.statistic = max_gap;
  report.threshold = 1e-9;
  report.pass = max_gap <= report.threshold;
  return report;
}

}  // namespace oppo

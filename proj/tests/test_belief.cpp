#include <doctest.h>

#include <cmath>
#include <limits>

#include "oppo/belief.hpp"
#include "oppo/tabular_mdp.hpp"

using namespace oppo;

namespace {

// One decision state fanning out to `k` successors, all terminal.
TabularMdp fan_mdp(int k, std::vector<double> probs, double reward_mean = 0.5, double reward_std = 0.5) {
  TabularMdp mdp;
  mdp.num_states = 1 + k;
  mdp.num_actions = 1;
  mdp.horizon = 2;
  mdp.transition.assign(static_cast<std::size_t>(mdp.num_states) * mdp.num_states, 0.0);
  for (int i = 0; i < k; ++i) mdp.transition[1 + i] = probs[i];
  for (int s = 1; s <= k; ++s) mdp.transition[static_cast<std::size_t>(s) * mdp.num_states + s] = 1.0;
  mdp.reward_mean.assign(mdp.num_states, 0.0);
  mdp.reward_mean[0] = reward_mean;
  mdp.reward_std.assign(mdp.num_states, 0.0);
  mdp.reward_std[0] = reward_std;
  mdp.initial_dist.assign(mdp.num_states, 0.0);
  mdp.initial_dist[0] = 1.0;
  mdp.terminal.assign(mdp.num_states, 1);
  mdp.terminal[0] = 0;
  mdp.validate();
  return mdp;
}

Transition obs(int s, int a, double reward, int next) {
  Transition t;
  t.state = s;
  t.action = a;
  t.reward = reward;
  t.next_state = next;
  return t;
}

}  // namespace

TEST_CASE("observe updates counters and dirichlet mass") {
  const TabularMdp mdp = fan_mdp(2, {0.5, 0.5});
  BeliefState belief(mdp, 0.25);
  CHECK(belief.visit_count(0, 0) == 0);
  CHECK(belief.alpha_total(0, 0) == doctest::Approx(2.0));
  belief.observe(obs(0, 0, 1.0, 1));
  CHECK(belief.visit_count(0, 0) == 1);
  CHECK(belief.next_state_count(1) == 1);
  CHECK(belief.alpha_total(0, 0) == doctest::Approx(3.0));
  CHECK(belief.posterior_transition_row(0, 0)[1] == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(belief.observe(obs(0, 0, 0.0, 0)), std::invalid_argument);  // off support
  CHECK_THROWS_AS(belief.observe(obs(7, 0, 0.0, 1)), std::invalid_argument);
}

TEST_CASE("flat-prior posterior mean is the sample mean") {
  const TabularMdp mdp = fan_mdp(2, {0.5, 0.5});
  BeliefOptions options;
  options.reward_prior_variance = std::numeric_limits<double>::infinity();
  BeliefState belief(mdp, 0.25, options);
  belief.observe(obs(0, 0, 1.0, 1));
  belief.observe(obs(0, 0, 0.0, 2));
  CHECK(belief.posterior_reward_mean(0, 0) == doctest::Approx(0.5));
  CHECK(belief.posterior_reward_var(0, 0) == doctest::Approx(0.25 / 2.0));
}

TEST_CASE("posterior transition concentrates on the true row") {
  const std::vector<double> row{0.6, 0.3, 0.1};
  const TabularMdp mdp = fan_mdp(3, row);
  BeliefState belief(mdp, 0.25);
  Rng rng(21);
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    belief.observe(obs(0, 0, 0.5, 1 + rng.categorical(row)));
  }
  const auto posterior = belief.posterior_transition_row(0, 0);
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(row[k] * (1.0 - row[k]) / n);
    CHECK(std::abs(posterior[1 + k] - row[k]) <= 3.0 * se + 3.0 / n);
  }
}

TEST_CASE("local uncertainty closed forms") {
  const TabularMdp mdp = fan_mdp(3, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  BeliefState belief(mdp, 0.25);
  const double q_max = belief.q_max();
  CHECK(q_max == doctest::Approx(2.0 * 0.5));  // horizon * max reward mean

  // Fresh uniform prior with unit mass: transition term (K-1)/(K+1).
  const double nu = belief.local_uncertainty_nu(0, 0);
  const double reward_var = belief.posterior_reward_var(0, 0);
  CHECK(nu - reward_var == doctest::Approx(q_max * q_max * 0.5));

  // The closed form matches the per-coordinate Dirichlet variance sum.
  double direct = 0.0;
  const double a0 = belief.alpha_total(0, 0);
  for (int k = 0; k < 3; ++k) {
    const double alpha = 1.0;
    const double mean = alpha / a0;
    const double var = alpha * (a0 - alpha) / (a0 * a0 * (a0 + 1.0));
    direct += var / mean;
  }
  CHECK(nu - reward_var == doctest::Approx(q_max * q_max * direct));

  // Deterministic known successor: no transition uncertainty.
  const TabularMdp det = fan_mdp(1, {1.0});
  BeliefState det_belief(det, 0.25);
  CHECK(det_belief.local_uncertainty_nu(0, 0) == doctest::Approx(det_belief.posterior_reward_var(0, 0)));
}

TEST_CASE("posterior reward variance bounded by sigma^2/n") {
  const TabularMdp mdp = fan_mdp(2, {0.5, 0.5});
  BeliefState belief(mdp, 0.25);
  Rng rng(22);
  for (int n = 1; n <= 50; ++n) {
    belief.observe(obs(0, 0, rng.normal(0.5, 0.5), 1 + rng.uniform_int(2)));
    CHECK(belief.posterior_reward_var(0, 0) <= 0.25 / n + 1e-12);
  }
}

TEST_CASE("cu_bound clamps and scales") {
  const TabularMdp mdp = fan_mdp(3, {0.2, 0.3, 0.5});
  BeliefState belief(mdp, 0.25);
  const double c_u = 0.25 + belief.q_max() * belief.q_max() * 3.0;
  CHECK(belief.cu_bound(0, 0, c_u) == doctest::Approx(c_u));  // n = 0 clamps
  for (int i = 0; i < 4; ++i) belief.observe(obs(0, 0, 0.5, 1));
  CHECK(belief.cu_bound(0, 0, c_u) == doctest::Approx(c_u / 4.0));
  for (int i = 0; i < 4; ++i) belief.observe(obs(0, 0, 0.5, 1));
  CHECK(belief.cu_bound(0, 0, c_u) == doctest::Approx(c_u / 8.0));
  CHECK_THROWS_AS(belief.cu_bound(0, 0, 0.0), std::invalid_argument);
}

TEST_CASE("nu stays below the count bound") {
  const TabularMdp mdp = fan_mdp(3, {0.2, 0.3, 0.5});
  BeliefState belief(mdp, 0.25);
  Rng rng(23);
  const double c_u = 0.25 + belief.q_max() * belief.q_max() * 3.0;
  for (int i = 0; i < 60; ++i) {
    belief.observe(obs(0, 0, rng.normal(0.5, 0.5), 1 + rng.categorical(std::vector<double>{0.2, 0.3, 0.5})));
    CHECK(belief.local_uncertainty_nu(0, 0) <= belief.cu_bound(0, 0, c_u) + 1e-12);
  }
}

TEST_CASE("next-state count bonus") {
  const TabularMdp mdp = fan_mdp(2, {0.5, 0.5});
  BeliefState belief(mdp, 0.25);
  CHECK(belief.next_state_count_bonus(1) == doctest::Approx(1.0));  // unvisited
  for (int i = 0; i < 100; ++i) belief.observe(obs(0, 0, 0.5, 1));
  CHECK(belief.next_state_count_bonus(1) == doctest::Approx(0.01));
}

TEST_CASE("tree approximation: mean successor bonus tracks K/n") {
  const std::vector<double> row{0.5, 0.3, 0.2};
  const TabularMdp mdp = fan_mdp(3, row);
  BeliefState belief(mdp, 0.25);
  Rng rng(24);
  const int n = 2000;
  for (int i = 0; i < n; ++i) belief.observe(obs(0, 0, 0.5, 1 + rng.categorical(row)));
  double mean_bonus = 0.0;
  for (int k = 0; k < 3; ++k) mean_bonus += row[k] * belief.next_state_count_bonus(1 + k);
  const double predicted = 3.0 / static_cast<double>(belief.visit_count(0, 0));
  CHECK(mean_bonus == doctest::Approx(predicted).epsilon(0.15));
}

TEST_CASE("sampled models concentrate and stay stochastic") {
  const std::vector<double> row{0.7, 0.3};
  const TabularMdp mdp = fan_mdp(2, row);
  BeliefState belief(mdp, 0.25);
  Rng rng(25);
  for (int i = 0; i < 100000; ++i) belief.observe(obs(0, 0, 0.5, 1 + rng.categorical(row)));

  Rng sampler(26);
  for (int draw = 0; draw < 100; ++draw) {
    const TabularMdp sample = belief.sample_mdp(sampler);
    const auto posterior = belief.posterior_transition_row(0, 0);
    for (int s = 0; s < sample.num_states; ++s) {
      for (int a = 0; a < sample.num_actions; ++a) {
        double sum = 0.0;
        for (double p : sample.row(s, a)) sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
    CHECK(std::abs(sample.row(0, 0)[1] - posterior[1]) < 1e-2);
  }
}

TEST_CASE("sampling determinism and degenerate reward posterior") {
  const TabularMdp mdp = fan_mdp(2, {0.5, 0.5}, 0.5, 0.0);
  BeliefState belief(mdp, 0.0);  // known rewards
  belief.observe(obs(0, 0, 0.5, 1));
  Rng r1(27), r2(27);
  const TabularMdp a = belief.sample_mdp(r1);
  const TabularMdp b = belief.sample_mdp(r2);
  CHECK(a.transition == b.transition);
  CHECK(a.reward_mean == b.reward_mean);
  CHECK(a.reward_mean[0] == doctest::Approx(belief.posterior_reward_mean(0, 0)));
}

TEST_CASE("nu decreases in expectation with more data") {
  const std::vector<double> row{0.4, 0.6};
  double mean_after_n = 0.0, mean_after_2n = 0.0;
  const int sequences = 100;
  const int n = 10;
  for (int seq = 0; seq < sequences; ++seq) {
    const TabularMdp mdp = fan_mdp(2, row);
    BeliefState belief(mdp, 0.25);
    Rng rng(1000 + seq);
    for (int i = 0; i < n; ++i) belief.observe(obs(0, 0, rng.normal(0.5, 0.5), 1 + rng.categorical(row)));
    mean_after_n += belief.local_uncertainty_nu(0, 0);
    for (int i = 0; i < n; ++i) belief.observe(obs(0, 0, rng.normal(0.5, 0.5), 1 + rng.categorical(row)));
    mean_after_2n += belief.local_uncertainty_nu(0, 0);
  }
  CHECK(mean_after_2n / sequences <= mean_after_n / sequences);
}

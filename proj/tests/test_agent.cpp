#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "oppo/agent.hpp"
#include "oppo/belief.hpp"
#include "oppo/ube.hpp"

using namespace oppo;

namespace {

TabularMdp three_state_chain() {
  TabularMdp mdp;
  mdp.num_states = 3;
  mdp.num_actions = 2;
  mdp.horizon = 4;
  mdp.transition = {0, 1, 0, 1, 0, 0,   // s0: a0 forward, a1 stay
                    0, 0, 1, 0, 1, 0,   // s1: a0 forward, a1 stay
                    0, 0, 1, 0, 0, 1};  // s2 terminal
  mdp.reward_mean = {0, 0, 1.0, 0, 0, 0};
  mdp.reward_std = {0, 0, 0, 0, 0, 0};
  mdp.initial_dist = {1, 0, 0};
  mdp.terminal = {0, 0, 1};
  mdp.validate();
  return mdp;
}

TabularMdp two_armed_bandit() {
  TabularMdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 2;
  mdp.horizon = 1;
  mdp.transition = {0, 1, 0, 1, 0, 1, 0, 1};
  mdp.reward_mean = {1.0, 0.0, 0.0, 0.0};
  mdp.reward_std = {0, 0, 0, 0};
  mdp.initial_dist = {1, 0};
  mdp.terminal = {0, 1};
  mdp.validate();
  return mdp;
}

AgentConfig small_config(Variant variant) {
  AgentConfig config;
  config.variant = variant;
  config.actors = 4;
  config.steps_per_actor = 16;
  config.rnd_hidden = 16;
  config.rnd_output = 8;
  return config;
}

TrajectoryBatch hand_batch(int actors, int steps) {
  TrajectoryBatch batch;
  batch.actors = actors;
  batch.steps = steps;
  const std::size_t total = batch.size();
  batch.state.assign(total, 0);
  batch.action.assign(total, 0);
  batch.next_state.assign(total, 0);
  batch.reward1.assign(total, 0.0);
  batch.reward2.assign(total, 0.0);
  batch.logp_old.assign(total, std::log(0.5));
  batch.done.assign(total, 0);
  batch.episode_start.assign(total, 0);
  batch.next_count.assign(total, 1);
  batch.raw_bonus_next.assign(total, 0.0);
  return batch;
}

}  // namespace

TEST_CASE("config validation") {
  AgentConfig config;
  config.clip_epsilon = 1.2;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = AgentConfig{};
  config.gamma = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = AgentConfig{};
  config.minibatches = 10000;
  config.actors = 2;
  config.steps_per_actor = 2;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  CHECK(variant_from_string("oppo_rnd") == Variant::kOppoRnd);
  CHECK_THROWS_AS(variant_from_string("bogus"), std::invalid_argument);
  CHECK(variant_name(Variant::kRnd) == "rnd");
}

TEST_CASE("collect records the hand-simulated trace") {
  const TabularMdp mdp = three_state_chain();
  AgentConfig config = small_config(Variant::kPpo);
  config.actors = 1;
  config.steps_per_actor = 3;
  config.minibatches = 1;
  Agent agent(mdp, config, 7);
  // Force action 0 everywhere.
  for (int s = 0; s < 3; ++s) {
    agent.mutable_policy().logits[s * 2 + 0] = 30.0;
  }
  const TrajectoryBatch batch = agent.collect();
  CHECK(batch.state == std::vector<int>{0, 1, 0});
  CHECK(batch.action == std::vector<int>{0, 0, 0});
  CHECK(batch.next_state == std::vector<int>{1, 2, 1});
  CHECK(batch.reward1 == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(batch.done == std::vector<std::uint8_t>{0, 1, 0});
  CHECK(batch.episode_start == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(batch.episode_rewards_completed == std::vector<double>{1.0});
  for (double r2 : batch.reward2) CHECK(r2 == 0.0);  // ppo: zero bonus source
}

TEST_CASE("exact-count bonuses replay the online count sequence") {
  const BanditTileConfig bandit;
  const TabularMdp mdp = build_bandit_tile(bandit);
  AgentConfig config = small_config(Variant::kOppoExact);
  Agent agent(mdp, config, 11);
  const TrajectoryBatch batch = agent.collect();
  // Independent replay in visitation (actor-major) order.
  std::vector<long long> counts(mdp.num_states, 0);
  for (int n = 0; n < batch.actors; ++n) {
    for (int h = 0; h < batch.steps; ++h) {
      const std::size_t i = batch.idx(n, h);
      counts[batch.next_state[i]] += 1;
      CHECK(batch.next_count[i] == counts[batch.next_state[i]]);
      CHECK(batch.reward2[i] == doctest::Approx(1.0 / counts[batch.next_state[i]]));
    }
  }
}

TEST_CASE("gae boundary cases") {
  TrajectoryBatch batch = hand_batch(1, 3);
  batch.state = {0, 1, 2};
  batch.next_state = {1, 2, 0};
  batch.reward1 = {0.5, -0.2, 1.0};
  batch.done = {0, 0, 1};
  const std::vector<double> values{0.1, 0.2, 0.3};

  // lambda = 0: one-step TD errors.
  const GaeResult td = gae(batch, values, batch.reward1, 0.9, 0.0);
  CHECK(td.advantage[0] == doctest::Approx(0.5 + 0.9 * 0.2 - 0.1));
  CHECK(td.advantage[1] == doctest::Approx(-0.2 + 0.9 * 0.3 - 0.2));
  CHECK(td.advantage[2] == doctest::Approx(1.0 - 0.3));  // done: no bootstrap

  // Single step straight into termination.
  TrajectoryBatch one = hand_batch(1, 1);
  one.state = {1};
  one.next_state = {2};
  one.reward1 = {0.7};
  one.done = {1};
  const GaeResult g = gae(one, values, one.reward1, 0.99, 0.95);
  CHECK(g.advantage[0] == doctest::Approx(0.7 - 0.2));

  // Tail bootstrap without termination uses the state after the last step.
  TrajectoryBatch open = hand_batch(1, 1);
  open.state = {0};
  open.next_state = {2};
  open.reward1 = {0.0};
  open.done = {0};
  const GaeResult boot = gae(open, values, open.reward1, 1.0, 1.0);
  CHECK(boot.advantage[0] == doctest::Approx(0.3 - 0.1));
}

TEST_CASE("two-head gae separates the reward channels") {
  const TabularMdp mdp = three_state_chain();
  AgentConfig config = small_config(Variant::kOppoExact);
  Agent agent(mdp, config, 13);
  TrajectoryBatch batch = agent.collect();
  std::vector<double> v1(3, 0.3), v2(3, 0.1);
  const GaeResult before1 = gae(batch, v1, batch.reward1, 0.99, 0.95);
  const GaeResult before2 = gae(batch, v2, batch.reward2, 0.99 * 0.99, 0.95);
  // Permute the uncertainty rewards.
  std::reverse(batch.reward2.begin(), batch.reward2.end());
  const GaeResult after1 = gae(batch, v1, batch.reward1, 0.99, 0.95);
  const GaeResult after2 = gae(batch, v2, batch.reward2, 0.99 * 0.99, 0.95);
  CHECK(after1.advantage == before1.advantage);
  CHECK(after1.value_target == before1.value_target);
  CHECK(after2.advantage != before2.advantage);
}

TEST_CASE("eta2 estimator conventions") {
  TrajectoryBatch batch = hand_batch(2, 3);
  batch.episode_start[batch.idx(0, 0)] = 1;
  batch.episode_start[batch.idx(1, 0)] = 1;
  std::vector<double> v2{0.0, 0.0, 0.0};
  std::vector<double> adv2(batch.size(), 0.0);
  adv2[batch.idx(0, 0)] = 0.4;
  adv2[batch.idx(1, 0)] = 0.8;
  CHECK(eta2_estimate(batch, v2, adv2) == doctest::Approx(0.6));
  CHECK(eta2_estimate(batch, v2, adv2, /*aggregate_sum=*/true) == doctest::Approx(1.2));

  // Negative per-stream estimates clamp to zero.
  adv2[batch.idx(0, 0)] = -0.5;
  CHECK(eta2_estimate(batch, v2, adv2) == doctest::Approx(0.4));

  // Zero everything.
  std::fill(adv2.begin(), adv2.end(), 0.0);
  CHECK(eta2_estimate(batch, v2, adv2) == 0.0);

  // No episode start anywhere: falls back to step 0 per stream.
  TrajectoryBatch cont = hand_batch(1, 2);
  std::vector<double> adv_cont(cont.size(), 0.0);
  adv_cont[0] = 0.9;
  CHECK(eta2_estimate(cont, v2, adv_cont) == doctest::Approx(0.9));

  // Mid-stream episode start wins over step 0.
  TrajectoryBatch mid = hand_batch(1, 3);
  mid.episode_start[1] = 1;
  std::vector<double> adv_mid{0.3, 0.7, 0.1};
  CHECK(eta2_estimate(mid, v2, adv_mid) == doctest::Approx(0.7));
}

TEST_CASE("eta2 estimate agrees with the exact solver in expectation") {
  const TabularMdp mdp = three_state_chain();
  BeliefState belief(mdp, 0.25);
  Rng obs_rng(14);
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      for (int k = 0; k < 3; ++k) {
        Transition t;
        t.state = s;
        t.action = a;
        t.next_state = obs_rng.categorical(mdp.row(s, a));
        t.reward = mdp.reward_mean[mdp.sa(s, a)];
        belief.observe(t);
      }
    }
  }
  const MeanModel model = mean_model(belief);
  const std::vector<double> policy(6, 0.5);
  const UbeSolution sol = solve(model, policy, 0.0, 0.0);

  // Simulate many fresh streams with r2 = nu(s, a); lambda = gamma = 1 and
  // v2 = 0 make each stream's estimate the episode's uncertainty return.
  const int streams = 20000;
  TrajectoryBatch batch = hand_batch(streams, mdp.horizon);
  Rng rng(15);
  for (int n = 0; n < streams; ++n) {
    int s = rng.categorical(mdp.initial_dist);
    bool running = true;
    for (int h = 0; h < mdp.horizon; ++h) {
      const std::size_t i = batch.idx(n, h);
      if (!running) {
        batch.state[i] = s;
        batch.done[i] = 1;
        batch.reward2[i] = 0.0;
        continue;
      }
      if (h == 0) batch.episode_start[i] = 1;
      const int a = rng.uniform01() < 0.5 ? 0 : 1;
      const Transition tr = step(mdp, s, a, h, rng);
      batch.state[i] = s;
      batch.action[i] = a;
      batch.next_state[i] = tr.next_state;
      batch.reward2[i] = belief.local_uncertainty_nu(s, a);
      batch.done[i] = tr.episode_done ? 1 : 0;
      if (tr.episode_done) running = false;
      else s = tr.next_state;
    }
  }
  const std::vector<double> v2(3, 0.0);
  const GaeResult g2 = gae(batch, v2, batch.reward2, 1.0, 1.0);
  const double estimate = eta2_estimate(batch, v2, g2.advantage);
  // Monte-Carlo tolerance: the per-episode return is bounded by H * max nu.
  CHECK(estimate == doctest::Approx(sol.eta2).epsilon(0.05));
}

TEST_CASE("optimistic advantage combinations") {
  const std::vector<double> a1{0.5, -0.2, 0.0};
  const std::vector<double> a2{0.1, 0.4, 0.0};
  const auto plain = optimistic_advantage(a1, a2, 0.0, 0.0, 0.0);
  CHECK(plain == a1);

  const auto zero_a2 = optimistic_advantage(a1, std::vector<double>{0, 0, 0}, 2.0, 0.5, 1.0);
  CHECK(zero_a2 == a1);

  const double c = 1e6;
  const double eta2 = 10.0;
  const auto limit = optimistic_advantage(a1, a2, std::sqrt(c), c, eta2);
  for (std::size_t i = 0; i < a1.size(); ++i) {
    CHECK(std::abs(limit[i] - (a1[i] + a2[i])) <= 5e-6 * std::max(1e-12, std::abs(a2[i])));
  }

  CHECK_THROWS_AS(optimistic_advantage(a1, a2, 1.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("clipped objective arithmetic") {
  PolicyTable policy(1, 2);
  TrajectoryBatch batch = hand_batch(1, 1);
  const std::vector<std::size_t> indices{0};

  // theta == theta_old: loss is the mean advantage.
  batch.logp_old[0] = std::log(0.5);
  std::vector<double> adv{0.37};
  CHECK(clipped_objective(policy, batch, indices, adv, 0.2) == doctest::Approx(0.37));

  // ratio 1.5, advantage 1 -> clipped to 1.2.
  batch.logp_old[0] = std::log(0.5 / 1.5);
  adv = {1.0};
  CHECK(clipped_objective(policy, batch, indices, adv, 0.2) == doctest::Approx(1.2));

  // ratio 0.5, advantage -1 -> clipped branch gives -0.8.
  batch.logp_old[0] = std::log(1.0);  // ratio = 0.5 / 1.0
  adv = {-1.0};
  CHECK(clipped_objective(policy, batch, indices, adv, 0.2) == doctest::Approx(-0.8));
}

TEST_CASE("softmax logit shift invariance") {
  PolicyTable policy(2, 3);
  Rng rng(16);
  for (auto& v : policy.logits) v = rng.normal();
  TrajectoryBatch batch = hand_batch(1, 4);
  batch.state = {0, 1, 0, 1};
  batch.action = {0, 2, 1, 1};
  std::vector<double> probs(3);
  for (std::size_t i = 0; i < 4; ++i) {
    policy.probs_row(batch.state[i], probs);
    batch.logp_old[i] = std::log(probs[batch.action[i]]) - 0.05;
  }
  std::vector<double> adv{0.5, -0.3, 0.2, 0.9};
  std::vector<std::size_t> indices{0, 1, 2, 3};
  const double before = policy_objective(policy, batch, indices, adv, 0.2, 0.01);
  for (int a = 0; a < 3; ++a) policy.logits[0 * 3 + a] += 11.7;
  const double after = policy_objective(policy, batch, indices, adv, 0.2, 0.01);
  CHECK(std::abs(after - before) <= 1e-9);
}

TEST_CASE("update is inert at zero learning rate") {
  const TabularMdp mdp = three_state_chain();
  AgentConfig config = small_config(Variant::kOppoExact);
  config.lr_policy = 0.0;
  config.lr_value = 0.0;
  Agent agent(mdp, config, 17);
  const TrajectoryBatch batch = agent.collect();
  const auto logits = agent.policy().logits;
  const auto v1 = agent.value_head1();
  agent.update(batch);
  CHECK(agent.policy().logits == logits);
  CHECK(agent.value_head1() == v1);
}

TEST_CASE("zero advantages leave only the entropy force") {
  // Zero rewards everywhere and zero values: advantages vanish, so the
  // entropy term alone pushes the policy toward uniform.
  TabularMdp mdp = three_state_chain();
  std::fill(mdp.reward_mean.begin(), mdp.reward_mean.end(), 0.0);
  AgentConfig config = small_config(Variant::kPpo);
  config.entropy_coef = 0.05;
  Agent agent(mdp, config, 18);
  // Start from a sharp policy.
  for (int s = 0; s < 3; ++s) agent.mutable_policy().logits[s * 2] = 2.0;
  std::vector<double> probs(2);
  agent.policy().probs_row(0, probs);
  double entropy_before = 0.0;
  for (double p : probs) entropy_before -= p * std::log(p);
  const TrajectoryBatch batch = agent.collect();
  agent.update(batch);
  agent.policy().probs_row(0, probs);
  double entropy_after = 0.0;
  for (double p : probs) entropy_after -= p * std::log(p);
  CHECK(entropy_after > entropy_before);
  // Policy rows stay valid distributions.
  double sum = probs[0] + probs[1];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("plain policy optimization solves a two-armed bandit") {
  const TabularMdp mdp = two_armed_bandit();
  AgentConfig config;
  config.variant = Variant::kPpo;
  config.actors = 8;
  config.steps_per_actor = 8;
  Agent agent(mdp, config, 19);
  for (int u = 0; u < 200; ++u) {
    const TrajectoryBatch batch = agent.collect();
    const UpdateMetrics metrics = agent.update(batch);
    CHECK_FALSE(metrics.nan_abort);
  }
  std::vector<double> probs(2);
  agent.policy().probs_row(0, probs);
  CHECK(probs[0] >= 0.99);
}

TEST_CASE("beta=0 variants update policy and extrinsic head identically to ppo") {
  const TabularMdp mdp = build_bandit_tile(BanditTileConfig{});
  AgentConfig base = small_config(Variant::kPpo);
  base.beta = 0.0;

  AgentConfig exact = base;
  exact.variant = Variant::kOppoExact;
  AgentConfig with_rnd = base;
  with_rnd.variant = Variant::kOppoRnd;

  Agent a_ppo(mdp, base, 23);
  Agent a_exact(mdp, exact, 23);
  Agent a_rnd(mdp, with_rnd, 23);
  for (int u = 0; u < 3; ++u) {
    a_ppo.update(a_ppo.collect());
    a_exact.update(a_exact.collect());
    a_rnd.update(a_rnd.collect());
  }
  CHECK(a_exact.policy().logits == a_ppo.policy().logits);
  CHECK(a_rnd.policy().logits == a_ppo.policy().logits);
  CHECK(a_exact.value_head1() == a_ppo.value_head1());
  CHECK(a_rnd.value_head1() == a_ppo.value_head1());
  // The uncertainty head differs: it sees the bonus rewards.
  CHECK(a_exact.value_head2() != a_ppo.value_head2());
}

TEST_CASE("the rnd variant folds the bonus into the single trained head") {
  const TabularMdp mdp = build_bandit_tile(BanditTileConfig{});
  AgentConfig plain = small_config(Variant::kPpo);
  AgentConfig combined = small_config(Variant::kRnd);
  Agent a_ppo(mdp, plain, 47);
  Agent a_rnd(mdp, combined, 47);
  a_ppo.update(a_ppo.collect());
  a_rnd.update(a_rnd.collect());
  // Same env/action streams, but the rnd head regresses r1 + r2, so the
  // trained value table must differ; its uncertainty head stays untouched.
  CHECK(a_rnd.value_head1() != a_ppo.value_head1());
  CHECK(a_rnd.value_head2() == std::vector<double>(mdp.num_states, 0.0));
}

TEST_CASE("nan rewards abort the update and roll back") {
  const TabularMdp mdp = three_state_chain();
  AgentConfig config = small_config(Variant::kPpo);
  Agent agent(mdp, config, 29);
  TrajectoryBatch batch = agent.collect();
  batch.reward1[3] = std::numeric_limits<double>::quiet_NaN();
  const auto logits = agent.policy().logits;
  const auto v1 = agent.value_head1();
  const UpdateMetrics metrics = agent.update(batch);
  CHECK(metrics.nan_abort);
  CHECK(agent.policy().logits == logits);
  CHECK(agent.value_head1() == v1);
}

TEST_CASE("policy rows remain distributions across updates") {
  const TabularMdp mdp = build_bandit_tile(BanditTileConfig{});
  AgentConfig config = small_config(Variant::kOppoExact);
  Agent agent(mdp, config, 31);
  std::vector<double> probs(4);
  for (int u = 0; u < 5; ++u) {
    agent.update(agent.collect());
    for (int s = 0; s < mdp.num_states; ++s) {
      agent.policy().probs_row(s, probs);
      double sum = 0.0;
      for (double p : probs) {
        CHECK(p > 0.0);
        sum += p;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("checkpoints resume runs exactly") {
  const TabularMdp mdp = build_bandit_tile(BanditTileConfig{});
  for (Variant variant : {Variant::kOppoExact, Variant::kOppoRnd}) {
    AgentConfig config = small_config(variant);
    Agent reference(mdp, config, 37);
    reference.update(reference.collect());
    reference.update(reference.collect());
    const std::string saved = reference.checkpoint_text();
    reference.update(reference.collect());

    Agent restored(mdp, config, 999);  // different seed; state comes from the checkpoint
    restored.restore_checkpoint_text(saved);
    restored.update(restored.collect());
    CHECK(restored.policy().logits == reference.policy().logits);
    CHECK(restored.value_head1() == reference.value_head1());
    CHECK(restored.value_head2() == reference.value_head2());
    CHECK(restored.total_env_steps() == reference.total_env_steps());
    if (variant == Variant::kOppoRnd) {
      REQUIRE(restored.rnd().has_value());
      CHECK(restored.rnd()->predictor().weights == reference.rnd()->predictor().weights);
    }
  }

  // Mismatched shape is rejected.
  AgentConfig config = small_config(Variant::kOppoExact);
  Agent agent(mdp, config, 41);
  const TabularMdp other = three_state_chain();
  Agent small_agent(other, config, 41);
  CHECK_THROWS_AS(small_agent.restore_checkpoint_text(agent.checkpoint_text()), std::invalid_argument);
}

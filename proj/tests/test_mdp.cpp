#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "oppo/tabular_mdp.hpp"

using namespace oppo;

namespace {

TabularMdp two_state_chain(int horizon) {
  TabularMdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 1;
  mdp.horizon = horizon;
  mdp.transition = {0.0, 1.0,   // s0 -> s1
                    0.0, 1.0};  // s1 -> s1
  mdp.reward_mean = {1.0, 0.0};
  mdp.reward_std = {0.0, 0.0};
  mdp.initial_dist = {1.0, 0.0};
  mdp.terminal = {0, 0};
  mdp.validate();
  return mdp;
}

}  // namespace

TEST_CASE("bandit tile default layout") {
  const BanditTileConfig config;
  const TabularMdp mdp = build_bandit_tile(config);
  CHECK(mdp.num_states == 225);
  CHECK(mdp.num_actions == 4);
  CHECK(mdp.horizon == 100);

  // Entering a goal pays that goal's Gaussian reward; variance 0.5.
  std::set<double> goal_means;
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < 4; ++a) {
      const double sd = mdp.reward_std[mdp.sa(s, a)];
      if (sd > 0.0) {
        CHECK(sd * sd == doctest::Approx(0.5).epsilon(1e-12));
        goal_means.insert(mdp.reward_mean[mdp.sa(s, a)]);
      } else {
        CHECK(mdp.reward_mean[mdp.sa(s, a)] == 0.0);
      }
    }
  }
  CHECK(goal_means == std::set<double>{0.5, 0.3});

  const int goal_a = bandit_tile_state(config, config.goals[0].cell);
  const int goal_b = bandit_tile_state(config, config.goals[1].cell);
  CHECK(mdp.is_terminal(goal_a));
  CHECK(mdp.is_terminal(goal_b));
  CHECK(mdp.initial_dist[bandit_tile_state(config, config.starts[0])] == 0.5);
  CHECK(mdp.initial_dist[bandit_tile_state(config, config.starts[1])] == 0.5);
}

TEST_CASE("bandit tile rejects colliding tiles") {
  BanditTileConfig config;
  config.goals[0].cell = config.starts[0];
  CHECK_THROWS_AS(build_bandit_tile(config), std::invalid_argument);

  BanditTileConfig outside;
  outside.goals[0].cell = {99, 99};
  CHECK_THROWS_AS(build_bandit_tile(outside), std::invalid_argument);
}

TEST_CASE("bandit tile on a 3x3 grid") {
  BanditTileConfig config;
  config.width = 3;
  config.height = 3;
  config.goals = {{{0, 0}, 0.5}, {{2, 2}, 0.3}};
  config.starts = {{0, 2}, {2, 0}};
  config.max_steps = 20;
  const TabularMdp mdp = build_bandit_tile(config);
  CHECK(mdp.num_actions == 4);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < 4; ++a) {
      double sum = 0.0;
      for (double p : mdp.row(s, a)) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("step semantics") {
  const TabularMdp chain = two_state_chain(3);
  Rng rng(5);
  const Transition tr = step(chain, 0, 0, 0, rng);
  CHECK(tr.next_state == 1);  // one-hot row
  CHECK(tr.reward == 1.0);    // zero reward std
  CHECK_FALSE(tr.episode_done);
  const Transition end = step(chain, tr.next_state, 0, 2, rng);
  CHECK(end.episode_done);  // horizon reached

  CHECK_THROWS_AS(step(chain, 5, 0, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(step(chain, 0, 3, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(step(chain, 0, 0, 3, rng), std::invalid_argument);
}

TEST_CASE("goal entry ends the episode") {
  const BanditTileConfig config;
  const TabularMdp mdp = build_bandit_tile(config);
  const GridCell goal = config.goals[0].cell;
  const int above = bandit_tile_state(config, {goal.x, goal.y - 1});
  Rng rng(6);
  const Transition tr = step(mdp, above, kDown, 0, rng);
  CHECK(tr.episode_done);
  CHECK(tr.next_state == bandit_tile_state(config, goal));
}

TEST_CASE("empirical transition frequencies match the row") {
  BanditTileConfig config;
  const TabularMdp mdp = sticky_wrap(build_bandit_tile(config), 0.25);
  const int s = bandit_tile_state(config, {3, 3}) * 5 + 1;  // prev action = down
  Rng rng(7);
  std::vector<int> counts(mdp.num_states, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    Rng local = Rng::stream(7, static_cast<std::uint64_t>(i));
    counts[step(mdp, s, kLeft, 0, local).next_state] += 1;
  }
  const auto row = mdp.row(s, kLeft);
  for (int k = 0; k < mdp.num_states; ++k) {
    const double p = row[k];
    const double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(counts[k] / static_cast<double>(n) - p) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("sticky wrap with zeta=0 reproduces base trajectories bitwise") {
  const BanditTileConfig config;
  const TabularMdp base = build_bandit_tile(config);
  const TabularMdp wrapped = sticky_wrap(base, 0.0);
  const int slots = base.num_actions + 1;

  EpisodeSim sim_base(base, Rng(11));
  EpisodeSim sim_wrap(wrapped, Rng(11));
  Rng actions(12);
  for (int t = 0; t < 500; ++t) {
    CHECK(sim_wrap.state() / slots == sim_base.state());
    const int a = actions.uniform_int(base.num_actions);
    const Transition tb = sim_base.step_action(a);
    const Transition tw = sim_wrap.step_action(a);
    CHECK(tw.next_state / slots == tb.next_state);
    CHECK(tw.reward == tb.reward);
    CHECK(tw.episode_done == tb.episode_done);
  }
}

TEST_CASE("sticky wrap mixes rows with 1-zeta / zeta") {
  // Two states, two deterministic actions: a0 stays, a1 swaps.
  TabularMdp mdp;
  mdp.num_states = 2;
  mdp.num_actions = 2;
  mdp.horizon = 5;
  mdp.transition = {1.0, 0.0, 0.0, 1.0,   // s0: a0 stay, a1 swap
                    0.0, 1.0, 1.0, 0.0};  // s1: a0 stay, a1 swap
  mdp.reward_mean = {0.1, 0.2, 0.3, 0.4};
  mdp.reward_std = {0.0, 0.0, 0.0, 0.0};
  mdp.initial_dist = {1.0, 0.0};
  mdp.terminal = {0, 0};
  mdp.validate();

  const double zeta = 0.25;
  const TabularMdp wrapped = sticky_wrap(mdp, zeta);
  // From (s0, prev=a0), choosing a1: executed a1 w.p. 0.75 -> (s1, a1);
  // executed a0 w.p. 0.25 -> (s0, a0).
  const int aug = sticky_state(mdp, 0, 0);
  const auto row = wrapped.row(aug, 1);
  CHECK(row[sticky_state(mdp, 1, 1)] == doctest::Approx(0.75));
  CHECK(row[sticky_state(mdp, 0, 0)] == doctest::Approx(0.25));
  CHECK(wrapped.reward_mean[wrapped.sa(aug, 1)] == doctest::Approx(0.75 * 0.2 + 0.25 * 0.1));
  // Fresh-episode slot executes the chosen action deterministically.
  const int fresh = sticky_state(mdp, 0, 2);
  CHECK(wrapped.row(fresh, 1)[sticky_state(mdp, 1, 1)] == doctest::Approx(1.0));

  CHECK_THROWS_AS(sticky_wrap(mdp, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(sticky_wrap(mdp, -0.1), std::invalid_argument);
}

TEST_CASE("dag layers") {
  const TabularMdp chain = two_state_chain(2);
  const auto layers = enumerate_dag_layers(chain);
  REQUIRE(layers.size() == 3);
  CHECK(layers[0] == std::vector<int>{0});
  CHECK(layers[1] == std::vector<int>{1});
  CHECK(layers[2] == std::vector<int>{1});

  const BanditTileConfig config;
  const TabularMdp bandit = build_bandit_tile(config);
  const auto bandit_layers = enumerate_dag_layers(bandit);
  CHECK(bandit_layers[0] == std::vector<int>{bandit_tile_state(config, config.starts[0]),
                                             bandit_tile_state(config, config.starts[1])});

  // A state with no incoming mass never shows up.
  TabularMdp island = two_state_chain(4);
  island.num_states = 3;
  island.transition = {0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
  island.reward_mean = {0.0, 0.0, 0.0};
  island.reward_std = {0.0, 0.0, 0.0};
  island.initial_dist = {1.0, 0.0, 0.0};
  island.terminal = {0, 0, 0};
  island.validate();
  for (const auto& layer : enumerate_dag_layers(island)) {
    for (int s : layer) CHECK(s != 2);
  }
}

TEST_CASE("episode length never exceeds the horizon") {
  const BanditTileConfig config;
  const TabularMdp mdp = build_bandit_tile(config);
  EpisodeSim sim(mdp, Rng(13));
  Rng actions(14);
  int length = 0;
  for (int t = 0; t < 20000; ++t) {
    const Transition tr = sim.step_action(actions.uniform_int(4));
    ++length;
    if (tr.episode_done) {
      CHECK(length <= mdp.horizon);
      length = 0;
    }
  }
}

TEST_CASE("mdp text serialization round-trips exactly") {
  const TabularMdp mdp = build_bandit_tile(BanditTileConfig{});
  const std::string text = mdp_to_text(mdp);
  const TabularMdp back = mdp_from_text(text);
  CHECK(back.num_states == mdp.num_states);
  CHECK(back.transition == mdp.transition);
  CHECK(back.reward_mean == mdp.reward_mean);
  CHECK(back.reward_std == mdp.reward_std);
  CHECK(back.initial_dist == mdp.initial_dist);
  CHECK(back.terminal == mdp.terminal);

  const std::string path = (std::filesystem::temp_directory_path() / "oppo_test_mdp.txt").string();
  save_mdp(mdp, path);
  const TabularMdp loaded = load_mdp(path);
  CHECK(loaded.transition == mdp.transition);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(mdp_from_text("garbage"), std::invalid_argument);
  CHECK_THROWS_AS(mdp_from_text("oppo-mdp 1\nstates 1\nactions 1\nhorizon 1\n"), std::invalid_argument);
}

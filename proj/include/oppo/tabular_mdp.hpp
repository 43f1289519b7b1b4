#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oppo/rng.hpp"

namespace oppo {

/// Finite-horizon tabular MDP with Gaussian rewards. Immutable after
/// construction; safe to share across threads.
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> transition;    // [s * A + a] -> row of num_states probs
  std::vector<double> reward_mean;   // [s * A + a]
  std::vector<double> reward_std;    // [s * A + a]
  std::vector<double> initial_dist;  // [s]
  std::vector<std::uint8_t> terminal;  // [s]

  int sa(int s, int a) const { return s * num_actions + a; }
  std::span<const double> row(int s, int a) const {
    return std::span<const double>(transition).subspan(static_cast<std::size_t>(sa(s, a)) * num_states, num_states);
  }
  std::span<double> row(int s, int a) {
    return std::span<double>(transition).subspan(static_cast<std::size_t>(sa(s, a)) * num_states, num_states);
  }
  bool is_terminal(int s) const { return terminal[s] != 0; }

  /// Throws std::invalid_argument if any structural invariant is broken
  /// (row sums, negative probabilities, negative reward stds, horizon < 1).
  void validate() const;
};

struct GridCell {
  int x = 0;
  int y = 0;
  bool operator==(const GridCell&) const = default;
};

struct GoalSpec {
  GridCell cell;
  double reward_mean = 0.0;
};

/// Grid world with two stochastic-reward goal tiles and two start tiles.
/// The modest tile sits directly in front of the start region and soaks up
/// most undirected episodes; the better tile lies across the grid, far
/// enough that a near-greedy policy essentially never stumbles onto it.
struct BanditTileConfig {
  int width = 15;
  int height = 15;
  std::vector<GoalSpec> goals{{{2, 7}, 0.3}, {{12, 7}, 0.5}};
  std::vector<GridCell> starts{{0, 6}, {0, 8}};
  double goal_reward_std = 0.7071067811865476;  // sqrt(0.5)
  int max_steps = 100;
};

struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  int step_index = 0;
  bool episode_done = false;
};

/// Grid movement actions, in index order.
enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

/// Builds the two-goal grid world. Movement off the grid leaves the cell
/// unchanged; entering a goal cell yields that goal's Gaussian reward and
/// ends the episode; all other steps pay exactly zero.
TabularMdp build_bandit_tile(const BanditTileConfig& config);

inline int bandit_tile_state(const BanditTileConfig& config, GridCell c) { return c.y * config.width + c.x; }

/// Samples one environment transition. The caller tracks step_index;
/// episode_done is set when the successor is terminal or the horizon is hit.
Transition step(const TabularMdp& mdp, int state, int action, int step_index, Rng& rng);

/// Sticky-action wrapper: the chosen action executes with probability
/// 1 - zeta, the previously executed action with probability zeta. States
/// are augmented with the previous action; the initial previous-action slot
/// behaves like the chosen action. Augmented rewards moment-match the
/// execution mixture (exact mean, matched variance).
TabularMdp sticky_wrap(const TabularMdp& mdp, double zeta);

inline int sticky_state(const TabularMdp& base, int s, int prev_action) { return s * (base.num_actions + 1) + prev_action; }

/// States reachable at each timestep h = 0..H under any action sequence.
/// Terminal states appear in the layer where they are first entered but are
/// not expanded further.
std::vector<std::vector<int>> enumerate_dag_layers(const TabularMdp& mdp);

/// Same layering over raw tables (used by the occupancy recursion).
std::vector<std::vector<int>> enumerate_dag_layers(int num_states, int num_actions, int horizon,
                                                   std::span<const double> transition,
                                                   std::span<const double> initial_dist,
                                                   std::span<const std::uint8_t> terminal);

/// Human-readable text serialization (decimal, lossless round-trip).
void save_mdp(const TabularMdp& mdp, const std::string& path);
TabularMdp load_mdp(const std::string& path);
std::string mdp_to_text(const TabularMdp& mdp);
TabularMdp mdp_from_text(const std::string& text);

/// Stateful episode runner over an immutable MDP; owns its rng stream.
class EpisodeSim {
 public:
  EpisodeSim(const TabularMdp& mdp, Rng rng) : mdp_(&mdp), rng_(std::move(rng)) { reset(); }

  void reset() {
    state_ = rng_.categorical(mdp_->initial_dist);
    t_ = 0;
  }

  /// Steps the current episode; resets automatically on the next call after
  /// an episode ends.
  Transition step_action(int action) {
    Transition tr = step(*mdp_, state_, action, t_, rng_);
    if (tr.episode_done) {
      reset();
    } else {
      state_ = tr.next_state;
      t_ = tr.step_index + 1;
    }
    return tr;
  }

  int state() const { return state_; }
  int time() const { return t_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  void restore(int state, int t, Rng rng) {
    state_ = state;
    t_ = t;
    rng_ = std::move(rng);
  }

 private:
  const TabularMdp* mdp_;
  Rng rng_;
  int state_ = 0;
  int t_ = 0;
};

}  // namespace oppo

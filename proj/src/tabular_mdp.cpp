#include "oppo/tabular_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace oppo {

namespace {

constexpr double kRowSumTolerance = 1e-9;

void check(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TabularMdp::validate() const {
  check(num_states >= 1, "TabularMdp: num_states must be positive");
  check(num_actions >= 1, "TabularMdp: num_actions must be positive");
  check(horizon >= 1, "TabularMdp: horizon must be at least 1");
  const std::size_t sa_count = static_cast<std::size_t>(num_states) * num_actions;
  check(transition.size() == sa_count * num_states, "TabularMdp: transition table size mismatch");
  check(reward_mean.size() == sa_count, "TabularMdp: reward_mean size mismatch");
  check(reward_std.size() == sa_count, "TabularMdp: reward_std size mismatch");
  check(initial_dist.size() == static_cast<std::size_t>(num_states), "TabularMdp: initial_dist size mismatch");
  check(terminal.size() == static_cast<std::size_t>(num_states), "TabularMdp: terminal size mismatch");
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      for (double p : row(s, a)) {
        check(p >= 0.0, "TabularMdp: negative transition probability");
        sum += p;
      }
      check(std::abs(sum - 1.0) <= kRowSumTolerance, "TabularMdp: transition row does not sum to 1");
      check(reward_std[sa(s, a)] >= 0.0, "TabularMdp: negative reward std");
    }
  }
  double rho_sum = 0.0;
  for (double p : initial_dist) {
    check(p >= 0.0, "TabularMdp: negative initial probability");
    rho_sum += p;
  }
  check(std::abs(rho_sum - 1.0) <= kRowSumTolerance, "TabularMdp: initial distribution does not sum to 1");
}

TabularMdp build_bandit_tile(const BanditTileConfig& config) {
  check(config.width >= 1 && config.height >= 1, "bandit tile: grid dimensions must be positive");
  check(config.max_steps >= 1, "bandit tile: max_steps must be at least 1");
  check(config.goals.size() == 2, "bandit tile: exactly two goal tiles expected");
  check(config.starts.size() == 2, "bandit tile: exactly two start tiles expected");
  check(config.goal_reward_std >= 0.0, "bandit tile: negative goal reward std");

  auto inside = [&](GridCell c) { return c.x >= 0 && c.x < config.width && c.y >= 0 && c.y < config.height; };
  std::set<std::pair<int, int>> used;
  for (const auto& g : config.goals) {
    check(inside(g.cell), "bandit tile: goal outside grid");
    check(used.insert({g.cell.x, g.cell.y}).second, "bandit tile: duplicate goal tile");
  }
  for (const auto& s : config.starts) {
    check(inside(s), "bandit tile: start outside grid");
    check(used.insert({s.x, s.y}).second, "bandit tile: start collides with another special tile");
  }

  TabularMdp mdp;
  mdp.num_states = config.width * config.height;
  mdp.num_actions = 4;
  mdp.horizon = config.max_steps;
  const std::size_t sa_count = static_cast<std::size_t>(mdp.num_states) * mdp.num_actions;
  mdp.transition.assign(sa_count * mdp.num_states, 0.0);
  mdp.reward_mean.assign(sa_count, 0.0);
  mdp.reward_std.assign(sa_count, 0.0);
  mdp.initial_dist.assign(mdp.num_states, 0.0);
  mdp.terminal.assign(mdp.num_states, 0);

  auto goal_mean = [&](int state) -> const GoalSpec* {
    for (const auto& g : config.goals) {
      if (bandit_tile_state(config, g.cell) == state) return &g;
    }
    return nullptr;
  };

  for (const auto& g : config.goals) mdp.terminal[bandit_tile_state(config, g.cell)] = 1;
  for (const auto& s : config.starts) mdp.initial_dist[bandit_tile_state(config, s)] = 0.5;

  const int dx[4] = {0, 0, -1, 1};
  const int dy[4] = {-1, 1, 0, 0};
  for (int y = 0; y < config.height; ++y) {
    for (int x = 0; x < config.width; ++x) {
      const int s = y * config.width + x;
      for (int a = 0; a < 4; ++a) {
        GridCell next{x + dx[a], y + dy[a]};
        if (!inside(next)) next = {x, y};  // walls are reflecting
        const int s_next = next.y * config.width + next.x;
        mdp.row(s, a)[s_next] = 1.0;
        if (const GoalSpec* g = goal_mean(s_next); g != nullptr && !mdp.is_terminal(s)) {
          mdp.reward_mean[mdp.sa(s, a)] = g->reward_mean;
          mdp.reward_std[mdp.sa(s, a)] = config.goal_reward_std;
        }
      }
    }
  }
  mdp.validate();
  return mdp;
}

Transition step(const TabularMdp& mdp, int state, int action, int step_index, Rng& rng) {
  if (state < 0 || state >= mdp.num_states) throw std::invalid_argument("step: state index out of range");
  if (action < 0 || action >= mdp.num_actions) throw std::invalid_argument("step: action index out of range");
  if (step_index < 0 || step_index >= mdp.horizon) throw std::invalid_argument("step: episode already over");
  Transition tr;
  tr.state = state;
  tr.action = action;
  tr.step_index = step_index;
  tr.next_state = rng.categorical(mdp.row(state, action));
  const int idx = mdp.sa(state, action);
  const double sd = mdp.reward_std[idx];
  tr.reward = sd > 0.0 ? rng.normal(mdp.reward_mean[idx], sd) : mdp.reward_mean[idx];
  tr.episode_done = mdp.is_terminal(tr.next_state) || step_index + 1 == mdp.horizon;
  return tr;
}

TabularMdp sticky_wrap(const TabularMdp& mdp, double zeta) {
  if (!(zeta >= 0.0 && zeta < 1.0)) throw std::invalid_argument("sticky_wrap: zeta must lie in [0, 1)");
  const int A = mdp.num_actions;
  const int slots = A + 1;  // previous action, plus a fresh-episode slot
  const int none = A;

  TabularMdp out;
  out.num_states = mdp.num_states * slots;
  out.num_actions = A;
  out.horizon = mdp.horizon;
  const std::size_t sa_count = static_cast<std::size_t>(out.num_states) * A;
  out.transition.assign(sa_count * out.num_states, 0.0);
  out.reward_mean.assign(sa_count, 0.0);
  out.reward_std.assign(sa_count, 0.0);
  out.initial_dist.assign(out.num_states, 0.0);
  out.terminal.assign(out.num_states, 0);

  for (int s = 0; s < mdp.num_states; ++s) {
    for (int p = 0; p < slots; ++p) {
      const int aug = sticky_state(mdp, s, p);
      out.terminal[aug] = mdp.terminal[s];
      out.initial_dist[aug] = (p == none) ? mdp.initial_dist[s] : 0.0;
      for (int a = 0; a < A; ++a) {
        const int exec_sticky = (p == none) ? a : p;
        // (executed action, probability) pairs; collapses when they agree.
        const double p_chosen = (exec_sticky == a) ? 1.0 : 1.0 - zeta;
        auto row_out = out.row(aug, a);
        double mean = 0.0;
        double second_moment = 0.0;
        auto mix = [&](int exec, double w) {
          if (w <= 0.0) return;
          auto base_row = mdp.row(s, exec);
          for (int s_next = 0; s_next < mdp.num_states; ++s_next) {
            if (base_row[s_next] > 0.0) row_out[sticky_state(mdp, s_next, exec)] += w * base_row[s_next];
          }
          const double m = mdp.reward_mean[mdp.sa(s, exec)];
          const double sd = mdp.reward_std[mdp.sa(s, exec)];
          mean += w * m;
          second_moment += w * (sd * sd + m * m);
        };
        mix(a, p_chosen);
        if (exec_sticky != a) mix(exec_sticky, zeta);
        out.reward_mean[out.sa(aug, a)] = mean;
        out.reward_std[out.sa(aug, a)] = std::sqrt(std::max(0.0, second_moment - mean * mean));
      }
    }
  }
  out.validate();
  return out;
}

std::vector<std::vector<int>> enumerate_dag_layers(int num_states, int num_actions, int horizon,
                                                   std::span<const double> transition,
                                                   std::span<const double> initial_dist,
                                                   std::span<const std::uint8_t> terminal) {
  std::vector<std::vector<int>> layers(horizon + 1);
  std::vector<std::uint8_t> current(num_states, 0);
  for (int s = 0; s < num_states; ++s) {
    if (initial_dist[s] > 0.0) current[s] = 1;
  }
  for (int h = 0; h <= horizon; ++h) {
    for (int s = 0; s < num_states; ++s) {
      if (current[s]) layers[h].push_back(s);
    }
    if (h == horizon) break;
    std::vector<std::uint8_t> next(num_states, 0);
    for (int s = 0; s < num_states; ++s) {
      if (!current[s] || terminal[s]) continue;
      for (int a = 0; a < num_actions; ++a) {
        const std::size_t base = (static_cast<std::size_t>(s) * num_actions + a) * num_states;
        for (int s_next = 0; s_next < num_states; ++s_next) {
          if (transition[base + s_next] > 0.0) next[s_next] = 1;
        }
      }
    }
    current = std::move(next);
  }
  return layers;
}

std::vector<std::vector<int>> enumerate_dag_layers(const TabularMdp& mdp) {
  return enumerate_dag_layers(mdp.num_states, mdp.num_actions, mdp.horizon, mdp.transition, mdp.initial_dist,
                              mdp.terminal);
}

std::string mdp_to_text(const TabularMdp& mdp) {
  std::ostringstream os;
  os << "oppo-mdp 1\n";
  os << "states " << mdp.num_states << "\n";
  os << "actions " << mdp.num_actions << "\n";
  os << "horizon " << mdp.horizon << "\n";
  os << "initial";
  for (double p : mdp.initial_dist) os << ' ' << fmt_double(p);
  os << "\nterminal";
  for (auto t : mdp.terminal) os << ' ' << int(t);
  os << "\n";
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      os << "reward " << s << ' ' << a << ' ' << fmt_double(mdp.reward_mean[mdp.sa(s, a)]) << ' '
         << fmt_double(mdp.reward_std[mdp.sa(s, a)]) << "\n";
    }
  }
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      os << "transition " << s << ' ' << a;
      for (double p : mdp.row(s, a)) os << ' ' << fmt_double(p);
      os << "\n";
    }
  }
  return os.str();
}

TabularMdp mdp_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "oppo-mdp" || version != 1) {
    throw std::invalid_argument("mdp_from_text: bad header");
  }
  TabularMdp mdp;
  auto expect = [&](const std::string& want) {
    std::string got;
    if (!(is >> got) || got != want) throw std::invalid_argument("mdp_from_text: expected '" + want + "'");
  };
  expect("states");
  is >> mdp.num_states;
  expect("actions");
  is >> mdp.num_actions;
  expect("horizon");
  is >> mdp.horizon;
  if (!is || mdp.num_states < 1 || mdp.num_actions < 1 || mdp.horizon < 1) {
    throw std::invalid_argument("mdp_from_text: bad dimensions");
  }
  const std::size_t sa_count = static_cast<std::size_t>(mdp.num_states) * mdp.num_actions;
  mdp.transition.assign(sa_count * mdp.num_states, 0.0);
  mdp.reward_mean.assign(sa_count, 0.0);
  mdp.reward_std.assign(sa_count, 0.0);
  mdp.initial_dist.assign(mdp.num_states, 0.0);
  mdp.terminal.assign(mdp.num_states, 0);
  expect("initial");
  for (auto& p : mdp.initial_dist) is >> p;
  expect("terminal");
  for (auto& t : mdp.terminal) {
    int v = 0;
    is >> v;
    t = static_cast<std::uint8_t>(v != 0);
  }
  for (std::size_t i = 0; i < sa_count; ++i) {
    int s = 0, a = 0;
    expect("reward");
    is >> s >> a;
    if (!is || s < 0 || s >= mdp.num_states || a < 0 || a >= mdp.num_actions) {
      throw std::invalid_argument("mdp_from_text: bad reward entry");
    }
    is >> mdp.reward_mean[mdp.sa(s, a)] >> mdp.reward_std[mdp.sa(s, a)];
  }
  for (std::size_t i = 0; i < sa_count; ++i) {
    int s = 0, a = 0;
    expect("transition");
    is >> s >> a;
    if (!is || s < 0 || s >= mdp.num_states || a < 0 || a >= mdp.num_actions) {
      throw std::invalid_argument("mdp_from_text: bad transition entry");
    }
    for (auto& p : mdp.row(s, a)) is >> p;
  }
  if (!is) throw std::invalid_argument("mdp_from_text: truncated file");
  mdp.validate();
  return mdp;
}

void save_mdp(const TabularMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mdp: cannot open " + path);
  out << mdp_to_text(mdp);
  if (!out) throw std::runtime_error("save_mdp: write failed for " + path);
}

TabularMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mdp: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return mdp_from_text(buf.str());
}

}  // namespace oppo

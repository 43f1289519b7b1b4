#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace oppo {

/// Writes softmax(logits) into out. Shift-invariant and safe for large
/// logits.
inline void softmax_row(std::span<const double> logits, std::span<double> out) {
  double max_logit = logits[0];
  for (double v : logits) max_logit = std::max(max_logit, v);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    total += out[i];
  }
  for (auto& v : out) v /= total;
}

/// Tabular softmax policy parameterized by one logit per (state, action).
struct PolicyTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> logits;  // [s * A + a]

  PolicyTable() = default;
  PolicyTable(int states, int actions) : num_states(states), num_actions(actions) {
    logits.assign(static_cast<std::size_t>(states) * actions, 0.0);
  }

  int sa(int s, int a) const { return s * num_actions + a; }

  std::span<const double> logits_row(int s) const {
    return std::span<const double>(logits).subspan(static_cast<std::size_t>(s) * num_actions, num_actions);
  }

  void probs_row(int s, std::span<double> out) const { softmax_row(logits_row(s), out); }

  /// Full probability table, row-stochastic by construction.
  std::vector<double> probabilities() const {
    std::vector<double> table(logits.size());
    for (int s = 0; s < num_states; ++s) {
      softmax_row(logits_row(s), std::span<double>(table).subspan(static_cast<std::size_t>(s) * num_actions, num_actions));
    }
    return table;
  }
};

}  // namespace oppo

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oppo/belief.hpp"
#include "oppo/rng.hpp"
#include "oppo/tabular_mdp.hpp"
#include "oppo/ube.hpp"

namespace oppo {

/// One randomly drawn layered-DAG problem: a ground-truth MDP whose state
/// graph is acyclic (states partitioned into layers, transitions strictly
/// layer to layer, last layer terminal), a posterior fitted from simulated
/// observations of it, and a random softmax policy.
struct RandomInstance {
  TabularMdp truth;
  BeliefState belief;
  std::vector<double> policy_logits;
  std::vector<double> policy;  // softmax of the logits
};

struct RandomInstanceOptions {
  int max_states = 6;
  int max_actions = 3;
  int max_horizon = 5;
  int min_observations = 1;
  int max_observations = 40;
  double sigma_r_min = 0.15;
  double sigma_r_max = 0.5;
};

RandomInstance make_random_instance(Rng& rng, const RandomInstanceOptions& options = {});

struct VerifyOptions {
  std::vector<std::string> suites{"all"};
  int instances = 50;       // theorem1 / corollary1 / policy_diff
  int samples = 10000;      // posterior draws per instance
  int theorem2_instances = 20;
  int gae_batches = 100;
  int gradcheck_seeds = 10;
  double fd_step = 1e-4;
  double nu_scale = 1.0;  // mutation knob for the variance bound
  std::uint64_t seed = 0;
};

struct VerifyReport {
  std::vector<CheckReport> checks;
  bool all_pass = true;
};

/// Runs the selected suites and aggregates one report line per check.
/// Suites: theorem1, corollary1, theorem2, policy_diff, gae, gradcheck,
/// or "all". An empty selection is an error.
VerifyReport verify_all(const VerifyOptions& options);

std::string render_report(const VerifyReport& report);

}  // namespace oppo

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "oppo/agent.hpp"
#include "oppo/tabular_mdp.hpp"

namespace oppo {

struct ExperimentConfig {
  Variant variant = Variant::kOppoExact;
  bool use_mdp_file = false;
  std::string mdp_file;
  BanditTileConfig bandit;
  AgentConfig agent;
  long long total_timesteps = 1'000'000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string out_dir = "runs/latest";
  int log_every_updates = 1;
  int moving_average_window = 100;

  void validate() const;
  TabularMdp build_mdp() const;
  long long updates() const {
    return total_timesteps / (static_cast<long long>(agent.actors) * agent.steps_per_actor);
  }
};

ExperimentConfig default_experiment_config();

/// Parses the nested key-value config. Unknown keys anywhere are rejected.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig config_from_json_file(const std::string& path);
std::string config_to_json_text(const ExperimentConfig& config);

/// Sets one field addressed by a dotted path (e.g. "agent.beta", "seeds",
/// "env.width") from a textual value, re-validating the result.
void apply_config_override(ExperimentConfig& config, const std::string& dotted_key, const std::string& value);

struct MetricsRow {
  long long timestep = 0;
  double reward_moving_avg = 0.0;
  double eta2 = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_reward2 = 0.0;
  double bonus_ratio = std::numeric_limits<double>::quiet_NaN();  // oppo_rnd only
};

struct SeedRunResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
};

struct ExperimentResult {
  std::vector<SeedRunResult> seeds;
};

/// Trailing mean; positions with fewer than `window` predecessors average
/// what exists.
std::vector<double> moving_average(std::span<const double> series, int window);

/// Mean over the batch of raw RND bonus of the entered state divided by
/// 1/n for that state at entry time.
double bonus_ratio_diagnostic(const TrajectoryBatch& batch);

/// Runs every seed to the timestep budget (deterministically per seed; seeds
/// may run in parallel). With write_files, emits one CSV per seed plus a
/// summary CSV of mean and std of the moving-average reward across seeds.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files = true);

std::string metrics_csv_text(const SeedRunResult& result);
std::string summary_csv_text(const ExperimentResult& result);

/// Mean over logged rows of the moving-average reward, averaged over seeds;
/// the normalized area under the learning curve.
double mean_area_under_curve(const ExperimentResult& result);

}  // namespace oppo

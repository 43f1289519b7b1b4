#include "oppo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace oppo {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw std::invalid_argument("config: unknown key '" + (where.empty() ? item.key() : where + "." + item.key()) +
                                  "'");
    }
  }
}

GridCell cell_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"x", "y"}, where);
  return {j.at("x").get<int>(), j.at("y").get<int>()};
}

}  // namespace

void ExperimentConfig::validate() const {
  agent.validate();
  if (use_mdp_file && mdp_file.empty()) throw std::invalid_argument("config: env.path missing");
  const long long batch = static_cast<long long>(agent.actors) * agent.steps_per_actor;
  if (total_timesteps < batch) throw std::invalid_argument("config: total_timesteps smaller than one batch");
  if (seeds.empty()) throw std::invalid_argument("config: at least one seed required");
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) throw std::invalid_argument("config: seeds must be distinct");
  if (log_every_updates < 1) throw std::invalid_argument("config: log_every_updates must be positive");
  if (moving_average_window < 1) throw std::invalid_argument("config: moving_average_window must be positive");
}

TabularMdp ExperimentConfig::build_mdp() const {
  if (use_mdp_file) return load_mdp(mdp_file);
  return build_bandit_tile(bandit);
}

ExperimentConfig default_experiment_config() { return ExperimentConfig{}; }

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  reject_unknown_keys(j,
                      {"variant", "env", "agent", "total_timesteps", "seeds", "out_dir", "log_every_updates",
                       "moving_average_window"},
                      "");
  if (j.contains("variant")) cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("env")) {
    const json& env = j.at("env");
    const std::string type = env.value("type", std::string("bandit_tile"));
    if (type == "bandit_tile") {
      reject_unknown_keys(env, {"type", "width", "height", "max_steps", "goal_reward_std", "goals", "starts"}, "env");
      if (env.contains("width")) cfg.bandit.width = env.at("width").get<int>();
      if (env.contains("height")) cfg.bandit.height = env.at("height").get<int>();
      if (env.contains("max_steps")) cfg.bandit.max_steps = env.at("max_steps").get<int>();
      if (env.contains("goal_reward_std")) cfg.bandit.goal_reward_std = env.at("goal_reward_std").get<double>();
      if (env.contains("goals")) {
        cfg.bandit.goals.clear();
        for (const auto& g : env.at("goals")) {
          reject_unknown_keys(g, {"x", "y", "mean"}, "env.goals[]");
          cfg.bandit.goals.push_back({{g.at("x").get<int>(), g.at("y").get<int>()}, g.at("mean").get<double>()});
        }
      }
      if (env.contains("starts")) {
        cfg.bandit.starts.clear();
        for (const auto& s : env.at("starts")) cfg.bandit.starts.push_back(cell_from_json(s, "env.starts[]"));
      }
    } else if (type == "mdp_file") {
      reject_unknown_keys(env, {"type", "path"}, "env");
      cfg.use_mdp_file = true;
      cfg.mdp_file = env.at("path").get<std::string>();
    } else {
      throw std::invalid_argument("config: unknown env.type '" + type + "'");
    }
  }
  if (j.contains("agent")) {
    const json& a = j.at("agent");
    reject_unknown_keys(a,
                        {"beta", "c", "clip_epsilon", "gamma", "lambda", "actors", "steps_per_actor", "epochs",
                         "minibatches", "lr_policy", "lr_value", "entropy_coef", "value_coef", "eta2_sum", "rnd_lr",
                         "rnd_train_ramp_updates", "rnd_lr_anneal_updates", "rnd_hidden", "rnd_output", "rnd_predictor_extra_layers", "rnd_steps_per_update", "rnd_train_delay_updates",
                         "rnd_normalize", "rnd_warmup"},
                        "agent");
    auto& ac = cfg.agent;
    if (a.contains("beta")) ac.beta = a.at("beta").get<double>();
    if (a.contains("c")) ac.c = a.at("c").get<double>();
    if (a.contains("clip_epsilon")) ac.clip_epsilon = a.at("clip_epsilon").get<double>();
    if (a.contains("gamma")) ac.gamma = a.at("gamma").get<double>();
    if (a.contains("lambda")) ac.lambda = a.at("lambda").get<double>();
    if (a.contains("actors")) ac.actors = a.at("actors").get<int>();
    if (a.contains("steps_per_actor")) ac.steps_per_actor = a.at("steps_per_actor").get<int>();
    if (a.contains("epochs")) ac.epochs = a.at("epochs").get<int>();
    if (a.contains("minibatches")) ac.minibatches = a.at("minibatches").get<int>();
    if (a.contains("lr_policy")) ac.lr_policy = a.at("lr_policy").get<double>();
    if (a.contains("lr_value")) ac.lr_value = a.at("lr_value").get<double>();
    if (a.contains("entropy_coef")) ac.entropy_coef = a.at("entropy_coef").get<double>();
    if (a.contains("value_coef")) ac.value_coef = a.at("value_coef").get<double>();
    if (a.contains("eta2_sum")) ac.eta2_sum = a.at("eta2_sum").get<bool>();
    if (a.contains("rnd_lr")) ac.rnd_lr = a.at("rnd_lr").get<double>();
    if (a.contains("rnd_train_ramp_updates")) ac.rnd_train_ramp_updates = a.at("rnd_train_ramp_updates").get<int>();
    if (a.contains("rnd_lr_anneal_updates")) ac.rnd_lr_anneal_updates = a.at("rnd_lr_anneal_updates").get<int>();
    if (a.contains("rnd_hidden")) ac.rnd_hidden = a.at("rnd_hidden").get<int>();
    if (a.contains("rnd_output")) ac.rnd_output = a.at("rnd_output").get<int>();
    if (a.contains("rnd_predictor_extra_layers")) ac.rnd_predictor_extra_layers = a.at("rnd_predictor_extra_layers").get<int>();
    if (a.contains("rnd_steps_per_update")) ac.rnd_steps_per_update = a.at("rnd_steps_per_update").get<int>();
    if (a.contains("rnd_train_delay_updates")) ac.rnd_train_delay_updates = a.at("rnd_train_delay_updates").get<int>();
    if (a.contains("rnd_normalize")) ac.rnd_normalize = a.at("rnd_normalize").get<bool>();
    if (a.contains("rnd_warmup")) ac.rnd_warmup = a.at("rnd_warmup").get<int>();
  }
  if (j.contains("total_timesteps")) cfg.total_timesteps = j.at("total_timesteps").get<long long>();
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("log_every_updates")) cfg.log_every_updates = j.at("log_every_updates").get<int>();
  if (j.contains("moving_average_window")) cfg.moving_average_window = j.at("moving_average_window").get<int>();
  cfg.agent.variant = cfg.variant;
  cfg.validate();
  return cfg;
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

std::string config_to_json_text(const ExperimentConfig& config) {
  json env;
  if (config.use_mdp_file) {
    env = {{"type", "mdp_file"}, {"path", config.mdp_file}};
  } else {
    json goals = json::array();
    for (const auto& g : config.bandit.goals) {
      goals.push_back({{"x", g.cell.x}, {"y", g.cell.y}, {"mean", g.reward_mean}});
    }
    json starts = json::array();
    for (const auto& s : config.bandit.starts) starts.push_back({{"x", s.x}, {"y", s.y}});
    env = {{"type", "bandit_tile"},
           {"width", config.bandit.width},
           {"height", config.bandit.height},
           {"max_steps", config.bandit.max_steps},
           {"goal_reward_std", config.bandit.goal_reward_std},
           {"goals", goals},
           {"starts", starts}};
  }
  const auto& a = config.agent;
  json j = {{"variant", variant_name(config.variant)},
            {"env", env},
            {"agent",
             {{"beta", a.beta},
              {"c", a.c},
              {"clip_epsilon", a.clip_epsilon},
              {"gamma", a.gamma},
              {"lambda", a.lambda},
              {"actors", a.actors},
              {"steps_per_actor", a.steps_per_actor},
              {"epochs", a.epochs},
              {"minibatches", a.minibatches},
              {"lr_policy", a.lr_policy},
              {"lr_value", a.lr_value},
              {"entropy_coef", a.entropy_coef},
              {"value_coef", a.value_coef},
              {"eta2_sum", a.eta2_sum},
              {"rnd_lr", a.rnd_lr},
              {"rnd_train_ramp_updates", a.rnd_train_ramp_updates},
              {"rnd_lr_anneal_updates", a.rnd_lr_anneal_updates},
              {"rnd_hidden", a.rnd_hidden},
              {"rnd_output", a.rnd_output},
              {"rnd_predictor_extra_layers", a.rnd_predictor_extra_layers},
              {"rnd_steps_per_update", a.rnd_steps_per_update},
              {"rnd_train_delay_updates", a.rnd_train_delay_updates},
              {"rnd_normalize", a.rnd_normalize},
              {"rnd_warmup", a.rnd_warmup}}},
            {"total_timesteps", config.total_timesteps},
            {"seeds", config.seeds},
            {"out_dir", config.out_dir},
            {"log_every_updates", config.log_every_updates},
            {"moving_average_window", config.moving_average_window}};
  return j.dump(2);
}

void apply_config_override(ExperimentConfig& config, const std::string& dotted_key, const std::string& value) {
  json j = json::parse(config_to_json_text(config));
  json* node = &j;
  std::string rest = dotted_key;
  for (;;) {
    const auto dot = rest.find('.');
    const std::string head = rest.substr(0, dot);
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::parse_error&) {
        parsed = value;  // bare strings are allowed unquoted
      }
      (*node)[head] = parsed;
      break;
    }
    node = &(*node)[head];
    rest = rest.substr(dot + 1);
  }
  config = config_from_json_text(j.dump());
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be positive");
  std::vector<double> out(series.size());
  double running = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    running += series[i];
    if (i >= static_cast<std::size_t>(window)) running -= series[i - window];
    const std::size_t n = std::min<std::size_t>(i + 1, window);
    out[i] = running / static_cast<double>(n);
  }
  return out;
}

double bonus_ratio_diagnostic(const TrajectoryBatch& batch) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += batch.raw_bonus_next[i] * static_cast<double>(batch.next_count[i]);
  }
  return total / static_cast<double>(batch.size());
}

namespace {

SeedRunResult run_seed(const ExperimentConfig& config, const TabularMdp& mdp, std::uint64_t seed) {
  AgentConfig agent_config = config.agent;
  agent_config.variant = config.variant;
  if (agent_config.rnd_train_ramp_updates == -1) {
    agent_config.rnd_train_ramp_updates = static_cast<int>(config.updates());
  }
  if (agent_config.rnd_lr_anneal_updates == -1) {
    agent_config.rnd_lr_anneal_updates = static_cast<int>(config.updates());
  }
  Agent agent(mdp, agent_config, seed);
  const long long updates = config.updates();
  SeedRunResult result;
  result.seed = seed;
  std::vector<double> episode_rewards;
  double tail_sum = 0.0;  // running trailing-window sum over episode_rewards
  const int window = config.moving_average_window;
  const bool track_ratio = config.variant == Variant::kOppoRnd;
  for (long long u = 1; u <= updates; ++u) {
    const TrajectoryBatch batch = agent.collect();
    const double ratio = track_ratio ? bonus_ratio_diagnostic(batch) : std::numeric_limits<double>::quiet_NaN();
    const UpdateMetrics metrics = agent.update(batch);
    for (double r : batch.episode_rewards_completed) {
      episode_rewards.push_back(r);
      tail_sum += r;
      if (episode_rewards.size() > static_cast<std::size_t>(window)) {
        tail_sum -= episode_rewards[episode_rewards.size() - 1 - window];
      }
    }
    if (u % config.log_every_updates == 0) {
      MetricsRow row;
      row.timestep = agent.total_env_steps();
      const std::size_t n = std::min<std::size_t>(episode_rewards.size(), window);
      row.reward_moving_avg = n > 0 ? tail_sum / static_cast<double>(n) : 0.0;
      row.eta2 = metrics.eta2;
      row.entropy = metrics.entropy;
      row.clip_fraction = metrics.clip_fraction;
      row.mean_reward2 = metrics.mean_reward2;
      row.bonus_ratio = ratio;
      result.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace

std::string metrics_csv_text(const SeedRunResult& result) {
  std::string out = "timestep,reward_ma,eta2,entropy,clip_fraction,mean_r2,bonus_ratio\n";
  for (const auto& row : result.rows) {
    out += std::to_string(row.timestep);
    out += ',';
    out += fmt(row.reward_moving_avg);
    out += ',';
    out += fmt(row.eta2);
    out += ',';
    out += fmt(row.entropy);
    out += ',';
    out += fmt(row.clip_fraction);
    out += ',';
    out += fmt(row.mean_reward2);
    out += ',';
    if (!std::isnan(row.bonus_ratio)) out += fmt(row.bonus_ratio);
    out += '\n';
  }
  return out;
}

std::string summary_csv_text(const ExperimentResult& result) {
  std::string out = "timestep,reward_ma_mean,reward_ma_std\n";
  if (result.seeds.empty()) return out;
  const std::size_t rows = result.seeds.front().rows.size();
  const double n = static_cast<double>(result.seeds.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (const auto& seed : result.seeds) mean += seed.rows[r].reward_moving_avg;
    mean /= n;
    double var = 0.0;
    for (const auto& seed : result.seeds) {
      const double d = seed.rows[r].reward_moving_avg - mean;
      var += d * d;
    }
    const double sd = n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    out += std::to_string(result.seeds.front().rows[r].timestep);
    out += ',';
    out += fmt(mean);
    out += ',';
    out += fmt(sd);
    out += '\n';
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files) {
  config.validate();
  const TabularMdp mdp = config.build_mdp();
  ExperimentResult result;
  result.seeds.resize(config.seeds.size());

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= config.seeds.size()) break;
      result.seeds[k] = run_seed(config, mdp, config.seeds[k]);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  if (write_files) {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec) throw std::runtime_error("run_experiment: cannot create output directory " + config.out_dir);
    for (const auto& seed_result : result.seeds) {
      const std::string path = config.out_dir + "/seed_" + std::to_string(seed_result.seed) + ".csv";
      std::ofstream out(path);
      if (!out) throw std::runtime_error("run_experiment: cannot write " + path);
      out << metrics_csv_text(seed_result);
    }
    const std::string summary_path = config.out_dir + "/summary.csv";
    std::ofstream out(summary_path);
    if (!out) throw std::runtime_error("run_experiment: cannot write " + summary_path);
    out << summary_csv_text(result);
    std::ofstream cfg_out(config.out_dir + "/config.json");
    cfg_out << config_to_json_text(config) << "\n";
  }
  return result;
}

double mean_area_under_curve(const ExperimentResult& result) {
  if (result.seeds.empty()) return 0.0;
  double total = 0.0;
  for (const auto& seed : result.seeds) {
    double seed_mean = 0.0;
    for (const auto& row : seed.rows) seed_mean += row.reward_moving_avg;
    total += seed.rows.empty() ? 0.0 : seed_mean / static_cast<double>(seed.rows.size());
  }
  return total / static_cast<double>(result.seeds.size());
}

}  // namespace oppo

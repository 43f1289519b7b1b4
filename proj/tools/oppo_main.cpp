// Command-line front end. Talks to the core exclusively through the C API
// in oppo.h, the same surface exposed to other language bindings.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oppo.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerifyFailed = 2;

struct ConfigDeleter {
  void operator()(oppo_config* c) const { oppo_config_free(c); }
};
struct MdpDeleter {
  void operator()(oppo_mdp* m) const { oppo_mdp_free(m); }
};
using ConfigPtr = std::unique_ptr<oppo_config, ConfigDeleter>;
using MdpPtr = std::unique_ptr<oppo_mdp, MdpDeleter>;

int report_error(const char* what, oppo_status status) {
  std::cerr << what << ": " << oppo_status_name(status) << ": " << oppo_last_error() << "\n";
  return status == OPPO_ERR_VERIFY_FAILED ? kExitVerifyFailed : kExitUsage;
}

ConfigPtr load_config(const std::string& config_path, int& error) {
  oppo_config* raw = nullptr;
  oppo_status status;
  if (config_path.empty()) {
    status = oppo_config_default(&raw);
  } else {
    status = oppo_config_load(config_path.c_str(), &raw);
  }
  if (status != OPPO_OK) {
    error = report_error("config", status);
    return nullptr;
  }
  error = kExitOk;
  return ConfigPtr(raw);
}

int apply_overrides(oppo_config* config, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "--set expects key=value, got '" << kv << "'\n";
      return kExitUsage;
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    const oppo_status status = oppo_config_set(config, key.c_str(), value.c_str());
    if (status != OPPO_OK) return report_error("--set", status);
  }
  return kExitOk;
}

std::string last_summary_line(const std::string& dir) {
  std::ifstream in(dir + "/summary.csv");
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return last;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular optimistic policy-optimization toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // train
  auto* train = app.add_subcommand("train", "Run the configured experiment and write metrics CSVs");
  std::string train_config, train_variant, train_out;
  std::int64_t train_seed = -1;
  std::int64_t train_timesteps = -1;
  std::vector<std::string> train_sets;
  train->add_option("--config", train_config, "JSON config file (defaults apply when omitted)");
  train->add_option("--variant", train_variant, "ppo | oppo_exact | oppo_rnd | rnd");
  train->add_option("--seed", train_seed, "Run a single seed instead of the configured list");
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--timesteps", train_timesteps, "Total environment steps");
  train->add_option("--set", train_sets, "Override any config field, e.g. --set agent.beta=0.5")->take_all();

  // verify
  auto* verify = app.add_subcommand("verify", "Run the numerical verification suites");
  std::vector<std::string> verify_suites;
  int verify_instances = 0;
  int verify_samples = 0;
  std::uint64_t verify_seed = 0;
  double verify_nu_scale = 1.0;
  verify->add_option("--suite", verify_suites,
                     "theorem1 | corollary1 | theorem2 | policy_diff | gae | gradcheck | all")
      ->take_all();
  verify->add_option("--instances", verify_instances, "Random problem instances per suite");
  verify->add_option("--samples", verify_samples, "Posterior samples per instance");
  verify->add_option("--seed", verify_seed, "Base seed for instance generation");
  verify->add_option("--nu-scale", verify_nu_scale, "Scale the local uncertainty (mutation diagnostics)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Grid sweep over one config field");
  std::string sweep_config, sweep_param, sweep_out = "runs/sweep";
  std::vector<std::string> sweep_values;
  std::vector<std::string> sweep_sets;
  sweep->add_option("--config", sweep_config, "JSON config file");
  sweep->add_option("--param", sweep_param, "Dotted config key, e.g. agent.beta")->required();
  sweep->add_option("--values", sweep_values, "Values to sweep")->required()->take_all();
  sweep->add_option("--out", sweep_out, "Base output directory");
  sweep->add_option("--set", sweep_sets, "Extra config overrides")->take_all();

  // plot
  auto* plot = app.add_subcommand("plot", "Render SVG learning curves from a run directory");
  std::string plot_dir;
  plot->add_option("--in", plot_dir, "Run directory with seed_*.csv files")->required();

  // mdp
  auto* mdp_cmd = app.add_subcommand("mdp", "Serialize or inspect the tabular environment");
  std::string mdp_config, mdp_out, mdp_in;
  double mdp_zeta = -1.0;
  mdp_cmd->add_option("--config", mdp_config, "JSON config file describing the environment");
  mdp_cmd->add_option("--out", mdp_out, "Write the environment as structured text");
  mdp_cmd->add_option("--in", mdp_in, "Read and validate an environment file");
  mdp_cmd->add_option("--sticky", mdp_zeta, "Apply the sticky-action wrapper with this zeta before writing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (train->parsed()) {
    int error = kExitOk;
    ConfigPtr config = load_config(train_config, error);
    if (!config) return error;
    if (const int rc = apply_overrides(config.get(), train_sets); rc != kExitOk) return rc;
    if (!train_variant.empty()) {
      if (oppo_status s = oppo_config_set(config.get(), "variant", train_variant.c_str()); s != OPPO_OK) {
        return report_error("--variant", s);
      }
    }
    if (train_seed >= 0) {
      const std::string one = "[" + std::to_string(train_seed) + "]";
      if (oppo_status s = oppo_config_set(config.get(), "seeds", one.c_str()); s != OPPO_OK) {
        return report_error("--seed", s);
      }
    }
    if (train_timesteps > 0) {
      const std::string v = std::to_string(train_timesteps);
      if (oppo_status s = oppo_config_set(config.get(), "total_timesteps", v.c_str()); s != OPPO_OK) {
        return report_error("--timesteps", s);
      }
    }
    if (!train_out.empty()) {
      if (oppo_status s = oppo_config_set(config.get(), "out_dir", train_out.c_str()); s != OPPO_OK) {
        return report_error("--out", s);
      }
    }
    char* dumped = nullptr;
    if (oppo_config_dump(config.get(), &dumped) == OPPO_OK) {
      std::cout << dumped << "\n";
      oppo_string_free(dumped);
    }
    if (oppo_status s = oppo_run_experiment(config.get()); s != OPPO_OK) return report_error("train", s);
    std::cout << "done\n";
    return kExitOk;
  }

  if (verify->parsed()) {
    std::string suites;
    if (verify_suites.empty()) {
      suites = "all";
    } else {
      for (std::size_t i = 0; i < verify_suites.size(); ++i) {
        if (i > 0) suites += ',';
        suites += verify_suites[i];
      }
    }
    char* report = nullptr;
    const oppo_status status =
        oppo_run_verification(suites.c_str(), verify_instances, verify_samples, verify_seed, verify_nu_scale, &report);
    if (report != nullptr) {
      std::cout << report;
      oppo_string_free(report);
    }
    if (status == OPPO_OK) return kExitOk;
    if (status == OPPO_ERR_VERIFY_FAILED) return kExitVerifyFailed;
    return report_error("verify", status);
  }

  if (sweep->parsed()) {
    for (const auto& value : sweep_values) {
      int error = kExitOk;
      ConfigPtr config = load_config(sweep_config, error);
      if (!config) return error;
      if (const int rc = apply_overrides(config.get(), sweep_sets); rc != kExitOk) return rc;
      if (oppo_status s = oppo_config_set(config.get(), sweep_param.c_str(), value.c_str()); s != OPPO_OK) {
        return report_error("sweep --param", s);
      }
      std::string dir_value = value;
      for (auto& ch : dir_value) {
        if (ch == '.' || ch == '/' || ch == ' ') ch = '_';
      }
      const std::string out_dir = sweep_out + "/" + sweep_param + "=" + dir_value;
      if (oppo_status s = oppo_config_set(config.get(), "out_dir", out_dir.c_str()); s != OPPO_OK) {
        return report_error("sweep --out", s);
      }
      if (oppo_status s = oppo_run_experiment(config.get()); s != OPPO_OK) return report_error("sweep", s);
      std::cout << sweep_param << "=" << value << " -> " << out_dir << "  [" << last_summary_line(out_dir) << "]\n";
    }
    return kExitOk;
  }

  if (plot->parsed()) {
    char* listing = nullptr;
    if (oppo_status s = oppo_plot_run_directory(plot_dir.c_str(), &listing); s != OPPO_OK) {
      return report_error("plot", s);
    }
    std::cout << listing;
    oppo_string_free(listing);
    return kExitOk;
  }

  if (mdp_cmd->parsed()) {
    MdpPtr mdp;
    if (!mdp_in.empty()) {
      oppo_mdp* raw = nullptr;
      if (oppo_status s = oppo_mdp_load(mdp_in.c_str(), &raw); s != OPPO_OK) return report_error("mdp --in", s);
      mdp.reset(raw);
    } else {
      int error = kExitOk;
      ConfigPtr config = load_config(mdp_config, error);
      if (!config) return error;
      oppo_mdp* raw = nullptr;
      if (oppo_status s = oppo_mdp_from_config(config.get(), &raw); s != OPPO_OK) {
        return report_error("mdp", s);
      }
      mdp.reset(raw);
    }
    if (mdp_zeta >= 0.0) {
      oppo_mdp* wrapped = nullptr;
      if (oppo_status s = oppo_mdp_sticky_wrap(mdp.get(), mdp_zeta, &wrapped); s != OPPO_OK) {
        return report_error("mdp --sticky", s);
      }
      mdp.reset(wrapped);
    }
    std::cout << "states=" << oppo_mdp_num_states(mdp.get()) << " actions=" << oppo_mdp_num_actions(mdp.get())
              << " horizon=" << oppo_mdp_horizon(mdp.get()) << "\n";
    if (!mdp_out.empty()) {
      if (oppo_status s = oppo_mdp_save(mdp.get(), mdp_out.c_str()); s != OPPO_OK) {
        return report_error("mdp --out", s);
      }
      std::cout << "wrote " << mdp_out << "\n";
    }
    return kExitOk;
  }

  return kExitUsage;
}

#include "oppo.h"

#include <cstring>
#include <sstream>
#include <string>

#include "oppo/experiment.hpp"
#include "oppo/plot.hpp"
#include "oppo/tabular_mdp.hpp"
#include "oppo/verify.hpp"

struct oppo_config {
  oppo::ExperimentConfig value;
};

struct oppo_mdp {
  oppo::TabularMdp value;
};

namespace {

thread_local std::string g_last_error;

oppo_status fail(oppo_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

char* dup_string(const std::string& text) {
  char* out = new char[text.size() + 1];
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

template <typename Fn>
oppo_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return fail(OPPO_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::runtime_error& e) {
    return fail(OPPO_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(OPPO_ERR_INTERNAL, e.what());
  }
}

}  // namespace

extern "C" {

const char* oppo_version(void) { return "0.1.0"; }

const char* oppo_status_name(oppo_status status) {
  switch (status) {
    case OPPO_OK: return "ok";
    case OPPO_ERR_INVALID_ARGUMENT: return "invalid argument";
    case OPPO_ERR_IO: return "io error";
    case OPPO_ERR_VERIFY_FAILED: return "verification failed";
    case OPPO_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* oppo_last_error(void) { return g_last_error.c_str(); }

void oppo_string_free(char* text) { delete[] text; }

oppo_status oppo_config_default(oppo_config** out) {
  if (out == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "out is NULL");
  return guarded([&] {
    *out = new oppo_config{oppo::default_experiment_config()};
    return OPPO_OK;
  });
}

oppo_status oppo_config_parse(const char* json_text, oppo_config** out) {
  if (json_text == nullptr || out == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    *out = new oppo_config{oppo::config_from_json_text(json_text)};
    return OPPO_OK;
  });
}

oppo_status oppo_config_load(const char* path, oppo_config** out) {
  if (path == nullptr || out == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    *out = new oppo_config{oppo::config_from_json_file(path)};
    return OPPO_OK;
  });
}

oppo_status oppo_config_set(oppo_config* config, const char* dotted_key, const char* value) {
  if (config == nullptr || dotted_key == nullptr || value == nullptr) {
    return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  return guarded([&] {
    oppo::apply_config_override(config->value, dotted_key, value);
    return OPPO_OK;
  });
}

oppo_status oppo_config_dump(const oppo_config* config, char** out_text) {
  if (config == nullptr || out_text == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    *out_text = dup_string(oppo::config_to_json_text(config->value));
    return OPPO_OK;
  });
}

void oppo_config_free(oppo_config* config) { delete config; }

oppo_status oppo_run_experiment(const oppo_config* config) {
  if (config == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "config is NULL");
  return guarded([&] {
    oppo::run_experiment(config->value, /*write_files=*/true);
    return OPPO_OK;
  });
}

oppo_status oppo_run_verification(const char* suites, int instances, int samples, uint64_t seed, double nu_scale,
                                  char** report_out) {
  if (suites == nullptr || report_out == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&]() -> oppo_status {
    oppo::VerifyOptions options;
    options.suites.clear();
    std::istringstream is(suites);
    std::string token;
    while (std::getline(is, token, ',')) {
      if (!token.empty()) options.suites.push_back(token);
    }
    if (instances > 0) options.instances = instances;
    if (samples > 0) options.samples = samples;
    options.seed = seed;
    options.nu_scale = nu_scale > 0.0 ? nu_scale : 1.0;
    const oppo::VerifyReport report = oppo::verify_all(options);
    *report_out = dup_string(oppo::render_report(report));
    if (!report.all_pass) {
      g_last_error = "one or more verification checks failed";
      return OPPO_ERR_VERIFY_FAILED;
    }
    return OPPO_OK;
  });
}

oppo_status oppo_plot_run_directory(const char* dir, char** listing_out) {
  if (dir == nullptr || listing_out == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    const auto paths = oppo::plot_run_directory(dir);
    std::string listing;
    for (const auto& p : paths) {
      listing += p;
      listing += '\n';
    }
    *listing_out = dup_string(listing);
    return OPPO_OK;
  });
}

oppo_status oppo_mdp_from_config(const oppo_config* config, oppo_mdp** out) {
  if (config == nullptr || out == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    *out = new oppo_mdp{config->value.build_mdp()};
    return OPPO_OK;
  });
}

oppo_status oppo_mdp_load(const char* path, oppo_mdp** out) {
  if (path == nullptr || out == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    *out = new oppo_mdp{oppo::load_mdp(path)};
    return OPPO_OK;
  });
}

oppo_status oppo_mdp_save(const oppo_mdp* mdp, const char* path) {
  if (mdp == nullptr || path == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    oppo::save_mdp(mdp->value, path);
    return OPPO_OK;
  });
}

oppo_status oppo_mdp_sticky_wrap(const oppo_mdp* mdp, double zeta, oppo_mdp** out) {
  if (mdp == nullptr || out == nullptr) return fail(OPPO_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    *out = new oppo_mdp{oppo::sticky_wrap(mdp->value, zeta)};
    return OPPO_OK;
  });
}

int oppo_mdp_num_states(const oppo_mdp* mdp) { return mdp == nullptr ? -1 : mdp->value.num_states; }
int oppo_mdp_num_actions(const oppo_mdp* mdp) { return mdp == nullptr ? -1 : mdp->value.num_actions; }
int oppo_mdp_horizon(const oppo_mdp* mdp) { return mdp == nullptr ? -1 : mdp->value.horizon; }

void oppo_mdp_free(oppo_mdp* mdp) { delete mdp; }

}  // extern "C"

/* C interface to the tabular optimistic policy-optimization toolkit.
 *
 * All functions returning oppo_status report failure details through
 * oppo_last_error(), which is thread local. Handles are opaque; every
 * *_free function accepts NULL.
 */
#ifndef OPPO_H_
#define OPPO_H_

#include <stdint.h>

#if defined(_WIN32)
#define OPPO_API __declspec(dllexport)
#else
#define OPPO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum oppo_status {
  OPPO_OK = 0,
  OPPO_ERR_INVALID_ARGUMENT = 1,
  OPPO_ERR_IO = 2,
  OPPO_ERR_VERIFY_FAILED = 3,
  OPPO_ERR_INTERNAL = 4
} oppo_status;

typedef struct oppo_config oppo_config;
typedef struct oppo_mdp oppo_mdp;

OPPO_API const char* oppo_version(void);
OPPO_API const char* oppo_status_name(oppo_status status);

/* Message for the most recent failing call on the calling thread. */
OPPO_API const char* oppo_last_error(void);

/* Frees strings returned through char** out parameters. */
OPPO_API void oppo_string_free(char* text);

/* --- experiment configuration ------------------------------------- */

OPPO_API oppo_status oppo_config_default(oppo_config** out);
OPPO_API oppo_status oppo_config_parse(const char* json_text, oppo_config** out);
OPPO_API oppo_status oppo_config_load(const char* path, oppo_config** out);

/* Sets one field by dotted path, e.g. "agent.beta" or "env.width". The
 * value is parsed as JSON; bare strings are accepted unquoted. */
OPPO_API oppo_status oppo_config_set(oppo_config* config, const char* dotted_key, const char* value);
OPPO_API oppo_status oppo_config_dump(const oppo_config* config, char** out_text);
OPPO_API void oppo_config_free(oppo_config* config);

/* --- training ------------------------------------------------------ */

/* Runs every configured seed to the timestep budget and writes one
 * metrics CSV per seed plus a summary CSV into the configured output
 * directory. Deterministic per seed. */
OPPO_API oppo_status oppo_run_experiment(const oppo_config* config);

/* --- verification ---------------------------------------------------- */

/* Runs the numerical verification suites. `suites` is a comma-separated
 * list (theorem1, corollary1, theorem2, policy_diff, gae, gradcheck) or
 * "all"; `instances`/`samples` <= 0 select the defaults. The rendered
 * report (one line per check) is returned through report_out. Returns
 * OPPO_ERR_VERIFY_FAILED when any check fails. */
OPPO_API oppo_status oppo_run_verification(const char* suites, int instances, int samples, uint64_t seed,
                                           double nu_scale, char** report_out);

/* --- plots ---------------------------------------------------------- */

/* Renders line plots from the CSVs of a finished run directory; the
 * newline-separated list of written image paths is returned. */
OPPO_API oppo_status oppo_plot_run_directory(const char* dir, char** listing_out);

/* --- tabular MDP handles -------------------------------------------- */

OPPO_API oppo_status oppo_mdp_from_config(const oppo_config* config, oppo_mdp** out);
OPPO_API oppo_status oppo_mdp_load(const char* path, oppo_mdp** out);
OPPO_API oppo_status oppo_mdp_save(const oppo_mdp* mdp, const char* path);
OPPO_API oppo_status oppo_mdp_sticky_wrap(const oppo_mdp* mdp, double zeta, oppo_mdp** out);
OPPO_API int oppo_mdp_num_states(const oppo_mdp* mdp);
OPPO_API int oppo_mdp_num_actions(const oppo_mdp* mdp);
OPPO_API int oppo_mdp_horizon(const oppo_mdp* mdp);
OPPO_API void oppo_mdp_free(oppo_mdp* mdp);

#ifdef __cplusplus
}
#endif

#endif /* OPPO_H_ */

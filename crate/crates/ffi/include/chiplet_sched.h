#ifndef CHIPLET_SCHED_H
#define CHIPLET_SCHED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_UTF8 = 2,
  CS_STATUS_IO = 3,
  CS_STATUS_PARSE = 4,
  CS_STATUS_CONFIG = 5,
  CS_STATUS_TOPOLOGY = 6,
  CS_STATUS_THERMAL = 7,
  CS_STATUS_INVARIANT = 8,
  CS_STATUS_DIVERGED = 9,
  CS_STATUS_VALIDATION = 10,
  CS_STATUS_PANIC = 11,
} CsStatus;

// A loaded experiment.
typedef struct CsExperiment CsExperiment;

// A trained policy.
typedef struct CsPolicy CsPolicy;

// The result of one simulation run.
typedef struct CsReport CsReport;

typedef struct CsMetrics {
  uint64_t completed;
  uint64_t measured;
  uint64_t rejected;
  // Completed jobs per second after warm-up.
  double throughput;
  double mean_exec_time_s;
  double mean_e2e_latency_s;
  double mean_energy_j;
  double mean_edp_js;
  double makespan_s;
  uint64_t throttle_events;
} CsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cs_version(void);

// Copies the calling thread's last error message into `buf` (NUL-terminated)
// and returns its length without the terminator. Returns 0 if there is no
// error. If `buf` is null or `len` too small nothing is copied, so callers
// can query the size first.
//
// # Safety
// `buf` must be null or point to at least `len` writable bytes.
size_t cs_last_error_message(char *buf, size_t len);

// Loads an experiment file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CsStatus cs_experiment_load(const char *path, struct CsExperiment **out);

// # Safety
// `exp` must be null or a pointer from [`cs_experiment_load`], freed at most once.
void cs_experiment_free(struct CsExperiment *exp);

// Runs the invariant checks of an experiment file; `passed` receives 1 if
// every check passed. `jobs` of 0 keeps the configured stream length.
//
// # Safety
// `path` must be a NUL-terminated string and `passed` a valid pointer.
enum CsStatus cs_validate(const char *path, uint64_t seed, uint64_t jobs, int32_t *passed);

// Loads a policy file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CsStatus cs_policy_load(const char *path, struct CsPolicy **out);

// Trains a policy on the experiment. `total_steps` of 0 keeps the configured budget.
//
// # Safety
// `exp` must come from [`cs_experiment_load`] and `out` must be valid.
enum CsStatus cs_policy_train(const struct CsExperiment *exp,
                              uint64_t seed,
                              uint64_t total_steps,
                              struct CsPolicy **out);

// # Safety
// `policy` must come from this library and `path` be a NUL-terminated string.
enum CsStatus cs_policy_save(const struct CsPolicy *policy, const char *path);

// # Safety
// `policy` must be null or a pointer from this library, freed at most once.
void cs_policy_free(struct CsPolicy *policy);

// Simulates one workload stream. `policy` may be null unless `scheduler`
// is `"thermos"`; the preference is ignored by the baselines.
//
// # Safety
// Pointers must come from this library (or be null where allowed) and
// `scheduler` must be a NUL-terminated string.
enum CsStatus cs_run(const struct CsExperiment *exp,
                     const char *scheduler,
                     const struct CsPolicy *policy,
                     double omega_latency,
                     double omega_energy,
                     double admit_rate,
                     uint64_t seed,
                     struct CsReport **out);

// # Safety
// `report` must come from [`cs_run`] and `out` must be valid.
enum CsStatus cs_report_metrics(const struct CsReport *report, struct CsMetrics *out);

// Writes the per-job metrics CSV of a run.
//
// # Safety
// `report` must come from [`cs_run`] and `path` be a NUL-terminated string.
enum CsStatus cs_report_write_csv(const struct CsReport *report, const char *path);

// # Safety
// `report` must be null or a pointer from [`cs_run`], freed at most once.
void cs_report_free(struct CsReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHIPLET_SCHED_H */

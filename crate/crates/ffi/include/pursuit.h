#ifndef PURSUIT_H
#define PURSUIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call. Zero is success.
 */
typedef enum PursuitStatus {
  PURSUIT_STATUS_OK = 0,
  PURSUIT_STATUS_NULL_POINTER = 1,
  PURSUIT_STATUS_INVALID_UTF8 = 2,
  PURSUIT_STATUS_INVALID_CONFIG = 3,
  PURSUIT_STATUS_INVALID_ARGUMENT = 4,
  PURSUIT_STATUS_IO = 5,
  PURSUIT_STATUS_RUNTIME = 6,
  PURSUIT_STATUS_BUFFER_TOO_SMALL = 7,
  PURSUIT_STATUS_PANIC = 8,
} PursuitStatus;

/**
 * Finished batch of seeded runs for one case.
 */
typedef struct PursuitBatch PursuitBatch;

/**
 * Experiment configuration.
 */
typedef struct PursuitConfig PursuitConfig;

/**
 * A single run that can be stepped one tick at a time.
 */
typedef struct PursuitSimulation PursuitSimulation;

typedef struct PursuitRunSummary {
  uint64_t seed;
  /**
   * Tick of the last capture, or the tick cap when `completed` is false.
   */
  uint64_t capture_ticks;
  bool completed;
  uint32_t flexibility;
  double cumulative_reward;
} PursuitRunSummary;

typedef struct PursuitBatchSummary {
  size_t runs;
  double mean_capture;
  double std_capture;
  double min_capture;
  double max_capture;
  double mean_flexibility;
  double std_flexibility;
  /**
   * Runs that hit the tick cap.
   */
  size_t cut_off;
} PursuitBatchSummary;

typedef struct PursuitPursuer {
  uint32_t id;
  size_t x;
  size_t y;
  /**
   * False while the pursuer belongs to no coalition; `group` is then 0.
   */
  bool in_group;
  size_t group;
  uint32_t c_s;
  uint32_t c_t;
  uint32_t c_b;
} PursuitPursuer;

typedef struct PursuitEvader {
  uint32_t id;
  size_t x;
  size_t y;
  uint32_t difficulty;
  bool captured;
} PursuitEvader;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pursuit_version(void);

/**
 * Message of the last failed call on this thread, or null if none failed.
 * The pointer stays valid until the next failure on the same thread.
 */
const char *pursuit_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void pursuit_string_free(char *s);

/**
 * Default configuration for `case_name`, or for the default case when it is null.
 *
 * # Safety
 * `case_name` must be null or a NUL-terminated string; `out` must be writable.
 */
enum PursuitStatus pursuit_config_new(const char *case_name, struct PursuitConfig **out);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum PursuitStatus pursuit_config_from_toml(const char *text, struct PursuitConfig **out);

/**
 * Loads a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PursuitStatus pursuit_config_load(const char *path, struct PursuitConfig **out);

/**
 * Applies one `dotted.key=value` override, e.g. `learning.alpha=0.5`.
 *
 * # Safety
 * `cfg` must be a live config handle; `assignment` a NUL-terminated string.
 */
enum PursuitStatus pursuit_config_set(struct PursuitConfig *cfg, const char *assignment);

/**
 * Switches the case, keeping every other field.
 *
 * # Safety
 * `cfg` must be a live config handle; `case_name` a NUL-terminated string.
 */
enum PursuitStatus pursuit_config_set_case(struct PursuitConfig *cfg, const char *case_name);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum PursuitStatus pursuit_config_validate(const struct PursuitConfig *cfg);

/**
 * Serializes the config as TOML. Free the string with [`pursuit_string_free`].
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum PursuitStatus pursuit_config_to_toml(const struct PursuitConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library, not yet freed.
 */
void pursuit_config_free(struct PursuitConfig *cfg);

/**
 * Runs one seed to completion.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum PursuitStatus pursuit_run_single(const struct PursuitConfig *cfg,
                                      uint64_t seed,
                                      struct PursuitRunSummary *out);

/**
 * Runs every repetition of the configured case.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum PursuitStatus pursuit_batch_run(const struct PursuitConfig *cfg, struct PursuitBatch **out);

/**
 * Number of runs in the batch; 0 for a null handle.
 *
 * # Safety
 * `batch` must be null or a live batch handle.
 */
size_t pursuit_batch_len(const struct PursuitBatch *batch);

/**
 * Run `index` in seed order.
 *
 * # Safety
 * `batch` must be a live batch handle; `out` must be writable.
 */
enum PursuitStatus pursuit_batch_run_at(const struct PursuitBatch *batch,
                                        size_t index,
                                        struct PursuitRunSummary *out);

/**
 * # Safety
 * `batch` must be a live batch handle; `out` must be writable.
 */
enum PursuitStatus pursuit_batch_summary(const struct PursuitBatch *batch,
                                         struct PursuitBatchSummary *out);

/**
 * Writes the same CSV files and manifest as the command-line `run`.
 *
 * # Safety
 * `batch` and `cfg` must be live handles; `dir` a NUL-terminated string.
 */
enum PursuitStatus pursuit_batch_write_outputs(const struct PursuitBatch *batch,
                                               const struct PursuitConfig *cfg,
                                               const char *dir);

/**
 * # Safety
 * `batch` must be null or a handle from this library, not yet freed.
 */
void pursuit_batch_free(struct PursuitBatch *batch);

/**
 * Writes a JSON-lines replay of one run. `ticks` may be null.
 *
 * # Safety
 * `cfg` must be a live config handle; `path` a NUL-terminated string.
 */
enum PursuitStatus pursuit_trace_save(const struct PursuitConfig *cfg,
                                      uint64_t seed,
                                      const char *path,
                                      uint64_t *ticks);

/**
 * Places agents and forms the first coalitions; no tick has run yet.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum PursuitStatus pursuit_sim_new(const struct PursuitConfig *cfg,
                                   uint64_t seed,
                                   struct PursuitSimulation **out);

/**
 * Advances one tick. `*finished` is set when the run is over, either
 * before this call or because of it; a finished run is left unchanged.
 *
 * # Safety
 * `sim` must be a live simulation handle; `finished` must be writable.
 */
enum PursuitStatus pursuit_sim_step(struct PursuitSimulation *sim, bool *finished);

/**
 * Current tick; 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live simulation handle.
 */
uint64_t pursuit_sim_tick(const struct PursuitSimulation *sim);

/**
 * Copies pursuer states into `buf`. `*len` receives the pursuer count even
 * when `cap` is too small, in which case nothing is copied.
 *
 * # Safety
 * `sim` must be a live handle; `buf` must hold `cap` elements; `len` writable.
 */
enum PursuitStatus pursuit_sim_pursuers(const struct PursuitSimulation *sim,
                                        struct PursuitPursuer *buf,
                                        size_t cap,
                                        size_t *len);

/**
 * Copies evader states into `buf`; sizing works as in [`pursuit_sim_pursuers`].
 *
 * # Safety
 * `sim` must be a live handle; `buf` must hold `cap` elements; `len` writable.
 */
enum PursuitStatus pursuit_sim_evaders(const struct PursuitSimulation *sim,
                                       struct PursuitEvader *buf,
                                       size_t cap,
                                       size_t *len);

/**
 * Metrics so far. For an unfinished run `completed` is false and
 * `capture_ticks` is the tick cap.
 *
 * # Safety
 * `sim` must be a live simulation handle; `out` must be writable.
 */
enum PursuitStatus pursuit_sim_metrics(const struct PursuitSimulation *sim,
                                       struct PursuitRunSummary *out);

/**
 * # Safety
 * `sim` must be null or a handle from this library, not yet freed.
 */
void pursuit_sim_free(struct PursuitSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PURSUIT_H */

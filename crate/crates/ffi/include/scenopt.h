#ifndef SCENOPT_H
#define SCENOPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScenoptStatus {
  SCENOPT_STATUS_OK = 0,
  SCENOPT_STATUS_NULL_POINTER = 1,
  SCENOPT_STATUS_INVALID_ARGUMENT = 2,
  SCENOPT_STATUS_CONFIG = 3,
  SCENOPT_STATUS_CONFIDENCE_COLLAPSE = 4,
  SCENOPT_STATUS_EMPTY_ACQUISITION = 5,
  SCENOPT_STATUS_NUMERICAL = 6,
  SCENOPT_STATUS_IO = 7,
  SCENOPT_STATUS_CALLBACK = 8,
  SCENOPT_STATUS_TERMINATED = 9,
  SCENOPT_STATUS_PANIC = 10,
} ScenoptStatus;

/**
 * Optimizer progress as reported by [`scenopt_optimizer_status`].
 */
typedef enum ScenoptRunState {
  SCENOPT_RUN_STATE_RUNNING = 0,
  SCENOPT_RUN_STATE_CONVERGED = 1,
  SCENOPT_RUN_STATE_MAX_ITERATIONS = 2,
  SCENOPT_RUN_STATE_STALLED = 3,
} ScenoptRunState;

/**
 * Opaque optimizer handle.
 */
typedef struct ScenoptOptimizer ScenoptOptimizer;

/**
 * Measures the system at `point` (length `dim`) and writes `n_outputs`
 * noisy values to `out`. Returns 0 on success.
 */
typedef int (*ScenoptMeasureFn)(void *user_data,
                                const double *point,
                                size_t dim,
                                double *out,
                                size_t n_outputs);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *scenopt_last_error(void);

/**
 * Minimal scenario count `m` for violation level `nu`, per-iteration
 * confidence `kappa_t` and `n_outputs` outputs.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ScenoptStatus scenopt_min_scenarios(double nu,
                                         double kappa_t,
                                         size_t n_outputs,
                                         uint64_t *out);

/**
 * `kappa_t = 6 kappa / (pi^2 t^2)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ScenoptStatus scenopt_iteration_confidence(double kappa, uint64_t t, double *out);

/**
 * Builds an optimizer from a JSON document with keys `domain`, `kernel`,
 * `noise`, `optimizer` and optional `rng_seed`.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum ScenoptStatus scenopt_optimizer_new(const char *json, struct ScenoptOptimizer **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` must come from [`scenopt_optimizer_new`] and not be used afterwards.
 */
void scenopt_optimizer_free(struct ScenoptOptimizer *h);

/**
 * Runs one iteration: selects a point, calls `measure` on it and updates
 * the model. Writes the selected grid index to `out_index` when an
 * experiment was executed, or `SIZE_MAX` if the optimizer stopped instead.
 *
 * # Safety
 * `h` must be a live handle, `measure` must honour its contract and
 * `out_index` must be valid or null.
 */
enum ScenoptStatus scenopt_optimizer_step(struct ScenoptOptimizer *h,
                                          ScenoptMeasureFn measure,
                                          void *user_data,
                                          size_t *out_index);

/**
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum ScenoptStatus scenopt_optimizer_status(const struct ScenoptOptimizer *h,
                                            enum ScenoptRunState *out);

/**
 * Grid index with the largest reward lower bound in the safe set.
 *
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum ScenoptStatus scenopt_optimizer_best_parameter(const struct ScenoptOptimizer *h, size_t *out);

/**
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum ScenoptStatus scenopt_optimizer_safe_set_size(const struct ScenoptOptimizer *h, size_t *out);

/**
 * Number of experiments executed so far.
 *
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum ScenoptStatus scenopt_optimizer_experiments(const struct ScenoptOptimizer *h, size_t *out);

/**
 * Grid size, parameter dimension and output count.
 *
 * # Safety
 * `h` must be a live handle; each out pointer must be valid or null.
 */
enum ScenoptStatus scenopt_optimizer_shape(const struct ScenoptOptimizer *h,
                                           size_t *n_points,
                                           size_t *dim,
                                           size_t *n_outputs);

/**
 * Copies grid point `index` into `out` (capacity `len`, at least the
 * parameter dimension).
 *
 * # Safety
 * `h` must be a live handle and `out` valid for `len` writes.
 */
enum ScenoptStatus scenopt_optimizer_grid_point(const struct ScenoptOptimizer *h,
                                                size_t index,
                                                double *out,
                                                size_t len);

/**
 * Runs a full experiment config (the CLI's JSON format) and writes traces
 * and `summary.json` into `out_dir`.
 *
 * # Safety
 * Both arguments must be nul-terminated strings.
 */
enum ScenoptStatus scenopt_run_experiment(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCENOPT_H */

#ifndef CONDVINE_H
#define CONDVINE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bivariate copula families.
 */
typedef enum CondvineFamily {
  CONDVINE_FAMILY_INDEPENDENCE = 0,
  CONDVINE_FAMILY_GAUSSIAN = 1,
  CONDVINE_FAMILY_CLAYTON = 2,
  CONDVINE_FAMILY_GUMBEL = 3,
  CONDVINE_FAMILY_FRANK = 4,
} CondvineFamily;

/**
 * Counter-clockwise rotations; 90 and 270 are only valid for Clayton
 * and Gumbel.
 */
typedef enum CondvineRotation {
  CONDVINE_ROTATION_DEG0 = 0,
  CONDVINE_ROTATION_DEG90 = 90,
  CONDVINE_ROTATION_DEG180 = 180,
  CONDVINE_ROTATION_DEG270 = 270,
} CondvineRotation;

/**
 * Status codes returned by every API function.
 */
typedef enum CondvineStatus {
  CONDVINE_STATUS_OK = 0,
  CONDVINE_STATUS_NULL_POINTER = 1,
  CONDVINE_STATUS_INVALID_ARGUMENT = 2,
  CONDVINE_STATUS_NUMERIC_ERROR = 3,
  CONDVINE_STATUS_IO_ERROR = 4,
  CONDVINE_STATUS_MCMC_ERROR = 5,
} CondvineStatus;

/**
 * Vine structure.
 */
typedef enum CondvineVineKind {
  CONDVINE_VINE_KIND_D_VINE = 0,
  CONDVINE_VINE_KIND_C_VINE = 1,
} CondvineVineKind;

/**
 * Opaque posterior trace handle.
 */
typedef struct CondvineTrace CondvineTrace;

/**
 * Opaque vine specification handle.
 */
typedef struct CondvineVine CondvineVine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the message of the most recent error on this thread into `buf`
 * (NUL-terminated, truncated to `len` bytes). Returns the full message
 * length in bytes, excluding the terminator. `buf` may be null to
 * query the length.
 *
 * # Safety
 * `buf`, when non-null, must point to `len` writable bytes.
 */
uintptr_t condvine_last_error(char *buf, uintptr_t len);

/**
 * Kendall's tau implied by the parameter.
 *
 * # Safety
 * `out` must be a valid writable pointer.
 */
enum CondvineStatus condvine_pair_tau(enum CondvineFamily family,
                                      enum CondvineRotation rotation,
                                      double theta,
                                      double *out);

/**
 * Create a vine with the same family on every edge. The handle must
 * be released with `condvine_vine_free`.
 *
 * # Safety
 * `out` must be a valid writable pointer.
 */
enum CondvineStatus condvine_vine_new(uintptr_t dimension,
                                      enum CondvineVineKind kind,
                                      enum CondvineFamily family,
                                      enum CondvineRotation rotation,
                                      struct CondvineVine **out);

/**
 * Release a vine handle. Null is a no-op.
 *
 * # Safety
 * `vine` must be null or a pointer returned by `condvine_vine_new`
 * that has not been freed yet.
 */
void condvine_vine_free(struct CondvineVine *vine);

/**
 * Number of edges (= number of parameters expected per evaluation).
 *
 * # Safety
 * `vine` and `out` must be valid pointers.
 */
enum CondvineStatus condvine_vine_edge_count(const struct CondvineVine *vine, uintptr_t *out);

/**
 * Vine copula log-density at one point. `thetas` holds one parameter
 * per edge in tree-major order; `u` holds `dimension` coordinates.
 *
 * # Safety
 * Arrays must have the stated lengths; `out` must be writable.
 */
enum CondvineStatus condvine_vine_log_density(const struct CondvineVine *vine,
                                              const double *thetas,
                                              uintptr_t n_thetas,
                                              const double *u,
                                              uintptr_t dimension,
                                              double *out);

/**
 * Simulate `n_rows` observations into `out` (row-major, `n_rows` x
 * `dimension`), deterministically from `seed`.
 *
 * # Safety
 * `out` must hold `n_rows * dimension` writable doubles; `thetas`
 * must hold `n_thetas` doubles.
 */
enum CondvineStatus condvine_vine_simulate(const struct CondvineVine *vine,
                                           const double *thetas,
                                           uintptr_t n_thetas,
                                           uint64_t seed,
                                           uintptr_t n_rows,
                                           double *out);

/**
 * Load a posterior trace written by the CLI (NDJSON). The handle must
 * be released with `condvine_trace_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CondvineStatus condvine_trace_open(const char *path, struct CondvineTrace **out);

/**
 * Release a trace handle. Null is a no-op.
 *
 * # Safety
 * `trace` must be null or an unfreed pointer from
 * `condvine_trace_open`.
 */
void condvine_trace_free(struct CondvineTrace *trace);

/**
 * Number of kept sweeps in the trace.
 *
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum CondvineStatus condvine_trace_record_count(const struct CondvineTrace *trace, uintptr_t *out);

/**
 * Number of observations the trace was fitted to.
 *
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum CondvineStatus condvine_trace_n_obs(const struct CondvineTrace *trace, uintptr_t *out);

/**
 * Most frequent cluster count across kept sweeps (smallest on ties).
 *
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum CondvineStatus condvine_trace_modal_cluster_count(const struct CondvineTrace *trace,
                                                       uintptr_t *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CONDVINE_H */

/* C interface to the repsim representational-similarity library. */

#ifndef REPSIM_H
#define REPSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a C API call. Numbering matches the CLI exit codes where a
 * category exists there (3 = dimension mismatch, 4 = degenerate input,
 * 5 = numerical failure).
 */
typedef enum RepsimStatus {
  REPSIM_STATUS_OK = 0,
  /**
   * Null pointer, non-finite data, zero dimension, or unknown name.
   */
  REPSIM_STATUS_INVALID_ARGUMENT = 1,
  REPSIM_STATUS_DIMENSION_MISMATCH = 3,
  REPSIM_STATUS_DEGENERATE_INPUT = 4,
  REPSIM_STATUS_NUMERICAL = 5,
} RepsimStatus;

/**
 * Opaque activation matrix handle (rows = stimuli, columns = neurons).
 */
typedef struct RepsimMatrix RepsimMatrix;

/**
 * Duality check result: absolute discrepancies between the kernel-route
 * and covariance-route values, and whether all are within tolerance.
 */
typedef struct RepsimDualityReport {
  double bures_vs_procrustes_abs_err;
  double nbs_vs_cos_theta_abs_err;
  double fidelity_vs_nuclear_abs_err;
  bool pass;
} RepsimDualityReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a matrix handle from `rows * cols` finite values in row-major
 * order. On success writes the handle to `out` and returns OK; `out` is
 * untouched on failure.
 *
 * # Safety
 * `values` must point to `rows * cols` readable doubles and `out` to a
 * writable pointer slot.
 */
enum RepsimStatus repsim_matrix_create(uintptr_t rows,
                                       uintptr_t cols,
                                       const double *values,
                                       struct RepsimMatrix **out);

/**
 * Releases a handle created by [`repsim_matrix_create`]. Null is a no-op.
 *
 * # Safety
 * `matrix` must be a handle from this library, not yet freed.
 */
void repsim_matrix_free(struct RepsimMatrix *matrix);

/**
 * Stimulus count of a matrix handle; 0 for null.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
uintptr_t repsim_matrix_rows(const struct RepsimMatrix *matrix);

/**
 * Neuron count of a matrix handle; 0 for null.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
uintptr_t repsim_matrix_cols(const struct RepsimMatrix *matrix);

/**
 * Evaluates one similarity measure between two matrices over the same
 * stimuli. `measure` is one of: "angular", "procrustes", "riemannian",
 * "cka", "nbs", "bures", "fidelity", "normalized_procrustes",
 * "normalized_bures", "rdm". Writes the value to `out` on success.
 *
 * # Safety
 * `x` and `y` must be live handles, `measure` a NUL-terminated string,
 * and `out` a writable double slot.
 */
enum RepsimStatus repsim_measure(const struct RepsimMatrix *x,
                                 const struct RepsimMatrix *y,
                                 const char *measure,
                                 double *out);

/**
 * Runs the duality verification (Bures vs Procrustes, NBS vs cosine of
 * the shape distance, fidelity vs cross-covariance nuclear norm) and
 * fills `out`.
 *
 * # Safety
 * `x` and `y` must be live handles and `out` a writable report slot.
 */
enum RepsimStatus repsim_verify_duality(const struct RepsimMatrix *x,
                                        const struct RepsimMatrix *y,
                                        struct RepsimDualityReport *out);

/**
 * Static description of a status code.
 */
const char *repsim_status_name(enum RepsimStatus status);

/**
 * Library version as a static NUL-terminated string.
 */
const char *repsim_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPSIM_H */

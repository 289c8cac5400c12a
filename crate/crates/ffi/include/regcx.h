#ifndef REGCX_H
#define REGCX_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum RegcxStatus {
  REGCX_STATUS_OK = 0,
  REGCX_STATUS_NULL_POINTER = 1,
  REGCX_STATUS_INVALID_ARGUMENT = 2,
  REGCX_STATUS_ZERO_TOTAL = 3,
  REGCX_STATUS_DEGENERATE_NETWORK = 4,
  REGCX_STATUS_DEGENERATE_SPECTRUM = 5,
  REGCX_STATUS_UNPRUNED = 6,
  REGCX_STATUS_NUMERIC = 7,
  REGCX_STATUS_BUFFER_TOO_SMALL = 8,
  REGCX_STATUS_PANIC = 9,
  REGCX_STATUS_OTHER = 10,
} RegcxStatus;

typedef enum RegcxStrategy {
  REGCX_STRATEGY_BM = 0,
  REGCX_STRATEGY_RLQ = 1,
  REGCX_STRATEGY_WM = 2,
  REGCX_STRATEGY_PRESENCE = 3,
  REGCX_STRATEGY_CM = 4,
} RegcxStrategy;

/**
 * Region × industry employment counts.
 */
typedef struct RegcxEmployment RegcxEmployment;

/**
 * An input matrix built from employment by one strategy.
 */
typedef struct RegcxInputMatrix RegcxInputMatrix;

/**
 * Region and industry scores from ECI or Fitness.
 */
typedef struct RegcxScores RegcxScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *regcx_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *regcx_version(void);

/**
 * Copy a row-major `n_regions × n_industries` array of employment counts.
 * Regions are coded `r0, r1, …` and industries `i0, i1, …`.
 *
 * # Safety
 * `values` must point to `n_regions * n_industries` readable doubles and
 * `out` to writable storage for one pointer.
 */
enum RegcxStatus regcx_employment_new(const double *values,
                                      size_t n_regions,
                                      size_t n_industries,
                                      struct RegcxEmployment **out);

/**
 * # Safety
 * `handle` must be null or a pointer returned by [`regcx_employment_new`]
 * that has not been freed.
 */
void regcx_employment_free(struct RegcxEmployment *handle);

/**
 * Build an input matrix. `cutoff` is used by CM only.
 *
 * # Safety
 * `employment` must be a live handle and `out` writable.
 */
enum RegcxStatus regcx_input_matrix_build(const struct RegcxEmployment *employment,
                                          enum RegcxStrategy strategy,
                                          double cutoff,
                                          struct RegcxInputMatrix **out);

/**
 * Drop all-zero rows and columns in place.
 *
 * # Safety
 * `matrix` must be a live handle.
 */
enum RegcxStatus regcx_input_matrix_prune(struct RegcxInputMatrix *matrix);

/**
 * # Safety
 * `matrix` must be a live handle; `n_regions` and `n_industries` writable.
 */
enum RegcxStatus regcx_input_matrix_shape(const struct RegcxInputMatrix *matrix,
                                          size_t *n_regions,
                                          size_t *n_industries);

/**
 * Copy the values out row-major.
 *
 * # Safety
 * `matrix` must be a live handle and `buf` must hold `len` doubles.
 */
enum RegcxStatus regcx_input_matrix_values(const struct RegcxInputMatrix *matrix,
                                           double *buf,
                                           size_t len);

/**
 * # Safety
 * `handle` must be null or a live input-matrix handle.
 */
void regcx_input_matrix_free(struct RegcxInputMatrix *handle);

/**
 * Economic Complexity Index with default solver settings. The matrix must
 * be pruned.
 *
 * # Safety
 * `matrix` must be a live handle and `out` writable.
 */
enum RegcxStatus regcx_eci(const struct RegcxInputMatrix *matrix, struct RegcxScores **out);

/**
 * Fitness/Complexity fixed point. Zero `max_iter` or nonpositive `tol`
 * select the defaults (1000 and 1e-8).
 *
 * # Safety
 * `matrix` must be a live handle and `out` writable.
 */
enum RegcxStatus regcx_fitness(const struct RegcxInputMatrix *matrix,
                               size_t max_iter,
                               double tol,
                               struct RegcxScores **out);

/**
 * Number of region and industry scores.
 *
 * # Safety
 * `scores` must be a live handle; the length pointers writable.
 */
enum RegcxStatus regcx_scores_len(const struct RegcxScores *scores,
                                  size_t *n_regions,
                                  size_t *n_industries);

/**
 * # Safety
 * `scores` must be a live handle and `buf` must hold `len` doubles.
 */
enum RegcxStatus regcx_scores_regions(const struct RegcxScores *scores, double *buf, size_t len);

/**
 * # Safety
 * `scores` must be a live handle and `buf` must hold `len` doubles.
 */
enum RegcxStatus regcx_scores_industries(const struct RegcxScores *scores, double *buf, size_t len);

/**
 * Iterations used and whether the solver converged (1) or hit its cap (0).
 *
 * # Safety
 * `scores` must be a live handle; the output pointers writable.
 */
enum RegcxStatus regcx_scores_convergence(const struct RegcxScores *scores,
                                          size_t *iterations,
                                          int32_t *converged);

/**
 * # Safety
 * `handle` must be null or a live scores handle.
 */
void regcx_scores_free(struct RegcxScores *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGCX_H */

#ifndef SLLG_H
#define SLLG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SllgStatus {
  SLLG_STATUS_OK = 0,
  SLLG_STATUS_NULL_POINTER = 1,
  SLLG_STATUS_INVALID_ARGUMENT = 2,
  SLLG_STATUS_SOLVER_FAILURE = 3,
  SLLG_STATUS_BUFFER_TOO_SMALL = 4,
  SLLG_STATUS_PANIC = 5,
} SllgStatus;

typedef enum SllgProfit {
  SLLG_PROFIT_BASIC = 0,
  SLLG_PROFIT_IMPROVED = 1,
} SllgProfit;

typedef struct SllgGrid SllgGrid;

typedef struct SllgInterpolant SllgInterpolant;

typedef struct SllgNodeFamily SllgNodeFamily;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, NUL-terminated and
 * truncated to `cap`; returns its full length in bytes.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
size_t sllg_last_error(char *buf, size_t cap);

/**
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_node_family_new(uint32_t p, double sigma2, struct SllgNodeFamily **out);

/**
 * # Safety
 * `family` must come from [`sllg_node_family_new`] and not be used afterwards.
 */
void sllg_node_family_free(struct SllgNodeFamily *family);

/**
 * Nodes of one level in increasing order.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_nodes(const struct SllgNodeFamily *family,
                           uint32_t level,
                           double *buf,
                           size_t cap,
                           size_t *len_out);

/**
 * Brownian path value at `t` from Lévy-Ciesielski coefficients.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_wiener_eval(const double *y, size_t len, double t, double *out);

/**
 * Largest quasi-optimal sparse grid with at most `max_points` points.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_grid_new(const struct SllgNodeFamily *family,
                              enum SllgProfit profit,
                              size_t max_points,
                              struct SllgGrid **out);

/**
 * # Safety
 * `grid` must come from [`sllg_grid_new`] and not be used afterwards.
 */
void sllg_grid_free(struct SllgGrid *grid);

/**
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_grid_len(const struct SllgGrid *grid, size_t *out);

/**
 * Number of parameter dimensions spanned by the grid.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_grid_dims(const struct SllgGrid *grid, size_t *out);

/**
 * Parameter vector of grid point `index`, of length `sllg_grid_dims`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_grid_point(const struct SllgGrid *grid,
                                size_t index,
                                double *buf,
                                size_t cap,
                                size_t *len_out);

/**
 * Interpolant of one value per grid point, in grid point order.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_interpolant_new(const struct SllgGrid *grid,
                                     const double *values,
                                     size_t len,
                                     struct SllgInterpolant **out);

/**
 * # Safety
 * `interp` must come from [`sllg_interpolant_new`] and not be used afterwards.
 */
void sllg_interpolant_free(struct SllgInterpolant *interp);

/**
 * Interpolant at `z`; missing coordinates count as zero.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_interpolant_eval(const struct SllgInterpolant *interp,
                                      const double *z,
                                      size_t len,
                                      double *out);

/**
 * Solves one sample path on the `n x n` mesh with `steps` time steps, unit
 * example noise scaled by `noise_scale` and initial state `(0, 0, 1)`.
 * Writes the final magnetisation as `3 (n + 1)^2` values, vertex-major.
 *
 * # Safety
 * Pointer arguments must be null or valid for the documented lengths;
 * handles must come from the matching `*_new` call.
 */
enum SllgStatus sllg_sample_final_state(size_t n,
                                        size_t steps,
                                        double noise_scale,
                                        const double *y,
                                        size_t len,
                                        double *buf,
                                        size_t cap,
                                        size_t *len_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLLG_H */

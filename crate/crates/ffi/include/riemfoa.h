#ifndef RIEMFOA_H
#define RIEMFOA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_SHAPE_MISMATCH = 2,
  RF_STATUS_INVALID_ARGUMENT = 3,
  RF_STATUS_NON_FINITE = 4,
  RF_STATUS_NUMERICAL = 5,
  RF_STATUS_SOLVER = 6,
  RF_STATUS_IO = 7,
  RF_STATUS_PANIC = 8,
} RfStatus;

typedef enum RfSolver {
  RF_SOLVER_FOA = 0,
  RF_SOLVER_FOA_NO_MOMENTUM = 1,
  RF_SOLVER_STEEPEST_DESCENT = 2,
  RF_SOLVER_CONJUGATE_GRADIENT = 3,
} RfSolver;

/**
 * Synthetic matrix-completion instance.
 */
typedef struct RfCompletion RfCompletion;

/**
 * Dense real matrix.
 */
typedef struct RfMatrix RfMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread; empty after success. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *rf_last_error(void);

/**
 * Builds a `rows x cols` matrix from `rows * cols` row-major values.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles; `out` must be writable.
 */
enum RfStatus rf_matrix_new(uintptr_t rows,
                            uintptr_t cols,
                            const double *data,
                            struct RfMatrix **out);

/**
 * # Safety
 * `m` must be null or a handle from this library not yet freed.
 */
void rf_matrix_free(struct RfMatrix *m);

/**
 * # Safety
 * `m` must be a live handle; `rows` and `cols` must be writable.
 */
enum RfStatus rf_matrix_shape(const struct RfMatrix *m, uintptr_t *rows, uintptr_t *cols);

/**
 * Copies the entries in row-major order into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `m` must be a live handle; `buf` must have room for `len` doubles.
 */
enum RfStatus rf_matrix_copy(const struct RfMatrix *m, double *buf, uintptr_t len);

/**
 * Thin SVD `A = U diag(sigma) V^T`, singular values descending; `sigma` is
 * returned as a column vector.
 *
 * # Safety
 * `a` must be a live handle; the out pointers must be writable.
 */
enum RfStatus rf_thin_svd(const struct RfMatrix *a,
                          struct RfMatrix **u,
                          struct RfMatrix **sigma,
                          struct RfMatrix **v);

/**
 * Best rank-`r` approximation of `a`.
 *
 * # Safety
 * `a` must be a live handle; `out` must be writable.
 */
enum RfStatus rf_truncate_rank(const struct RfMatrix *a, uintptr_t r, struct RfMatrix **out);

/**
 * Singular value thresholding: proximal map of `tau |.|_*`.
 *
 * # Safety
 * `a` must be a live handle; `out` must be writable.
 */
enum RfStatus rf_svt(const struct RfMatrix *a, double tau, struct RfMatrix **out);

/**
 * Column shrinkage: proximal map of `tau |.|_{2,1}`.
 *
 * # Safety
 * `a` must be a live handle; `out` must be writable.
 */
enum RfStatus rf_shrink_columns(const struct RfMatrix *a, double tau, struct RfMatrix **out);

/**
 * Random rank-`r` completion instance with `round(os * r (m + n - r))`
 * observed entries.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfStatus rf_completion_generate(uintptr_t m,
                                     uintptr_t n,
                                     uintptr_t r,
                                     double os,
                                     uint64_t seed,
                                     struct RfCompletion **out);

/**
 * # Safety
 * `inst` must be null or a handle from this library not yet freed.
 */
void rf_completion_free(struct RfCompletion *inst);

/**
 * Number of observed entries.
 *
 * # Safety
 * `inst` must be a live handle; `len` must be writable.
 */
enum RfStatus rf_completion_len(const struct RfCompletion *inst, uintptr_t *len);

/**
 * Solves the completion instance from the spectral start. Stops when the
 * relative residual on the observed entries reaches `residual_tol` (`<= 0`
 * disables) or after `max_iter` iterations. Any of `x`, `iterations`,
 * `relative_residual` may be null.
 *
 * # Safety
 * `inst` must be a live handle; non-null out pointers must be writable.
 */
enum RfStatus rf_completion_solve(const struct RfCompletion *inst,
                                  enum RfSolver solver,
                                  uintptr_t max_iter,
                                  double residual_tol,
                                  struct RfMatrix **x,
                                  uintptr_t *iterations,
                                  double *relative_residual);

/**
 * Low-rank representation of the columns of `d` by the rank-pursuit ALM
 * solver. `max_outer` and `max_iter` cap the outer and inner loops
 * (0 keeps the defaults). `x`, `e` and `residual` may be null.
 *
 * # Safety
 * `d` must be a live handle; non-null out pointers must be writable.
 */
enum RfStatus rf_lrr_solve(const struct RfMatrix *d,
                           double lambda,
                           double rho,
                           double beta,
                           uintptr_t rank_increment,
                           uintptr_t max_outer,
                           uintptr_t max_iter,
                           struct RfMatrix **x,
                           struct RfMatrix **e,
                           double *residual);

/**
 * Spectral clustering of a symmetric nonnegative `n x n` affinity into
 * `c` groups; writes `n` labels.
 *
 * # Safety
 * `affinity` must be a live handle; `labels` must have room for `n` values.
 */
enum RfStatus rf_spectral_cluster(const struct RfMatrix *affinity,
                                  uintptr_t c,
                                  uint64_t seed,
                                  uintptr_t *labels);

/**
 * Misclassification rate in percent, minimized over label matchings.
 *
 * # Safety
 * `pred` and `truth` must each point to `n` readable labels; `out` writable.
 */
enum RfStatus rf_clustering_error(const uintptr_t *pred,
                                  const uintptr_t *truth,
                                  uintptr_t n,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIEMFOA_H */

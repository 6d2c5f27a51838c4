#ifndef EXIT_MOMENTS_H
#define EXIT_MOMENTS_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EmStatus {
  EM_STATUS_OK = 0,
  EM_STATUS_NULL_POINTER = 1,
  EM_STATUS_INVALID_ARGUMENT = 2,
  EM_STATUS_INVALID_SPEC = 3,
  EM_STATUS_GRID_TOO_COARSE = 4,
  EM_STATUS_PARSE = 5,
  EM_STATUS_NOT_CONVERGED = 6,
  EM_STATUS_NUMERICAL = 7,
  EM_STATUS_IO = 8,
  EM_STATUS_PANIC = 9,
} EmStatus;

typedef enum EmExitRule {
  EM_EXIT_RULE_DISCRETE = 0,
  EM_EXIT_RULE_BROWNIAN_BRIDGE = 1,
} EmExitRule;

/**
 * Solved moment hierarchy handle.
 */
typedef struct EmHierarchy EmHierarchy;

/**
 * Discrete operator handle.
 */
typedef struct EmOperator EmOperator;

/**
 * One row of the bound report.
 */
typedef struct EmBoundRow {
  size_t k;
  double upper_polya;
  double upper_ratio;
  double upper_variance;
  double lower_moment;
  double lower_variance;
  double reference_lambda1;
  double polya_functional;
} EmBoundRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next call into this library.
 */
const char *em_last_error_message(void);

/**
 * Nodal Laplacian on a domain such as `"disk:1"` or `"rect:1x2"` with
 * spacing `h`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EmStatus em_operator_from_domain(const char *spec, double h, struct EmOperator **out);

/**
 * Operator from a dense row-major `n × n` symmetric positive definite
 * matrix with quadrature weight `cell_measure`. Only the upper triangle
 * is read.
 *
 * # Safety
 * `values` must point to `n * n` doubles and `out` must be valid.
 */
enum EmStatus em_operator_from_dense(const double *values,
                                     size_t n,
                                     double cell_measure,
                                     struct EmOperator **out);

/**
 * Number of unknowns, or 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t em_operator_order(const struct EmOperator *op);

/**
 * Quadrature volume `cell_measure · n`, or NaN for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
double em_operator_volume(const struct EmOperator *op);

/**
 * # Safety
 * `op` must be null or a handle not yet freed.
 */
void em_operator_free(struct EmOperator *op);

/**
 * Solves the hierarchy to `order` levels at relative tolerance `tol`.
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum EmStatus em_hierarchy_solve(const struct EmOperator *op,
                                 size_t order,
                                 double tol,
                                 struct EmHierarchy **out);

/**
 * # Safety
 * `hier` must be null or a live handle.
 */
size_t em_hierarchy_depth(const struct EmHierarchy *hier);

/**
 * Writes `T_1..=T_len` into `out`.
 *
 * # Safety
 * `hier` must be a live handle and `out` must hold `len` doubles.
 */
enum EmStatus em_hierarchy_moments(const struct EmHierarchy *hier, double *out, size_t len);

/**
 * # Safety
 * `hier` must be null or a handle not yet freed.
 */
void em_hierarchy_free(struct EmHierarchy *hier);

/**
 * Smallest eigenvalue and the projected mass of its eigenspace.
 *
 * # Safety
 * `op` must be a live handle; `lambda1` and `a_sq` must be valid.
 */
enum EmStatus em_principal_eigenpair(const struct EmOperator *op, double *lambda1, double *a_sq);

/**
 * Bound rows for `k = 1..=k_max`, written to `rows`. The hierarchy must
 * have depth at least `2·k_max`. A non-positive `volume` selects the
 * operator's quadrature volume.
 *
 * # Safety
 * Handles must be live and `rows` must hold `k_max` entries.
 */
enum EmStatus em_bounds(const struct EmOperator *op,
                        const struct EmHierarchy *hier,
                        size_t k_max,
                        double volume,
                        struct EmBoundRow *rows);

/**
 * Monte Carlo estimates of `E^{x0}[τ^k]`, `k = 1..=k_max`, written to
 * `means` and `std_errors`. Runs are reproducible for a fixed `seed`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string, `x0` must hold `dim` doubles and
 * both outputs must hold `k_max` doubles.
 */
enum EmStatus em_mc_exit_moments(const char *spec,
                                 const double *x0,
                                 size_t dim,
                                 size_t k_max,
                                 double dt,
                                 size_t n_paths,
                                 uint64_t seed,
                                 enum EmExitRule rule,
                                 double *means,
                                 double *std_errors);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXIT_MOMENTS_H */

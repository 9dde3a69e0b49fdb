#ifndef QSLQ_H
#define QSLQ_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QslqStatus {
  QSLQ_STATUS_OK = 0,
  QSLQ_STATUS_NULL_POINTER = 1,
  QSLQ_STATUS_INVALID_ARGUMENT = 2,
  QSLQ_STATUS_DIMENSION = 3,
  QSLQ_STATUS_NOT_ADAPTED = 4,
  QSLQ_STATUS_SINGULAR_GAIN = 5,
  QSLQ_STATUS_NOT_HERMITIAN = 6,
  QSLQ_STATUS_NOT_POSITIVE = 7,
  QSLQ_STATUS_ILL_CONDITIONED = 8,
  QSLQ_STATUS_UNBOUNDED = 9,
  QSLQ_STATUS_MEMORY_BUDGET = 10,
  QSLQ_STATUS_PARSE = 11,
  QSLQ_STATUS_BUFFER_TOO_SMALL = 12,
  QSLQ_STATUS_PANIC = 13,
} QslqStatus;

/**
 * A validated LQ problem.
 */
typedef struct QslqProblem QslqProblem;

/**
 * Riccati path and gains of one problem.
 */
typedef struct QslqRiccati QslqRiccati;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *qslq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qslq_version(void);

/**
 * Parses a problem description (`{"kind": "scalar-family" | "random" | "dense", ...}`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QslqStatus qslq_problem_from_json(const char *json, struct QslqProblem **out);

/**
 * Scalar family with default parameters on `modes` steps of `[0, 1]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QslqStatus qslq_problem_scalar_family(size_t modes, struct QslqProblem **out);

/**
 * Random filtration-compatible PSD problem.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QslqStatus qslq_problem_random(size_t modes,
                                    size_t controls,
                                    uint64_t seed,
                                    struct QslqProblem **out);

/**
 * Number of modes (= time steps). 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t qslq_problem_modes(const struct QslqProblem *problem);

/**
 * State dimension `2^N`. 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t qslq_problem_dim(const struct QslqProblem *problem);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void qslq_problem_free(struct QslqProblem *problem);

/**
 * Integrates the Riccati equation with `substeps` RK4 substeps per step
 * and strict inversion of `K`.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum QslqStatus qslq_riccati_solve(const struct QslqProblem *problem,
                                   size_t substeps,
                                   struct QslqRiccati **out);

/**
 * Number of stored nodes `N + 1`. 0 for a null handle.
 *
 * # Safety
 * `riccati` must be null or a live handle.
 */
size_t qslq_riccati_nodes(const struct QslqRiccati *riccati);

/**
 * Copies `P_node` row-major as interleaved `(re, im)` pairs into `buf`,
 * which must hold `2 * dim * dim` doubles.
 *
 * # Safety
 * `riccati` must be a live handle and `buf` valid for `len` writes.
 */
enum QslqStatus qslq_riccati_node(const struct QslqRiccati *riccati,
                                  size_t node,
                                  double *buf,
                                  size_t len);

/**
 * Smallest eigenvalue of `K` over all steps.
 *
 * # Safety
 * `riccati` must be a live handle and `out` a valid pointer.
 */
enum QslqStatus qslq_riccati_min_gain_eig(const struct QslqRiccati *riccati, double *out);

/**
 * Value `1/2 Re <P_0 eta, eta>` and closed-loop cost of the feedback.
 *
 * # Safety
 * Both handles must be live and belong together; `value_out` and
 * `cost_out` must be valid pointers.
 */
enum QslqStatus qslq_closed_loop(const struct QslqProblem *problem,
                                 const struct QslqRiccati *riccati,
                                 double *value_out,
                                 double *cost_out);

/**
 * # Safety
 * `riccati` must be null or a handle not yet freed.
 */
void qslq_riccati_free(struct QslqRiccati *riccati);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSLQ_H */

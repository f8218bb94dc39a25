/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef HARDY_TREE_H
#define HARDY_TREE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HtStatus {
  HT_STATUS_OK = 0,
  HT_STATUS_NULL_POINTER = 1,
  HT_STATUS_INVALID_ARGUMENT = 2,
  HT_STATUS_SIZE_CAP_EXCEEDED = 3,
  HT_STATUS_INVALID_INPUT = 4,
  HT_STATUS_NON_FINITE = 5,
  HT_STATUS_PANIC = 6,
  HT_STATUS_INTERNAL = 7,
} HtStatus;

/**
 * A rooted tree with weights `u`, `w`.
 */
typedef struct HtInstance HtInstance;

/**
 * A sigma-partition together with the exponents it was reduced with.
 */
typedef struct HtPartition HtPartition;

typedef struct HtSolverOptions {
  size_t restarts;
  size_t max_iter;
  double tol;
  uint64_t seed;
  bool certificate_starts;
} HtSolverOptions;

typedef struct HtNormResult {
  double value;
  size_t iterations;
  size_t restarts_used;
  bool converged;
} HtNormResult;

typedef struct HtBound {
  double value;
  size_t argmax;
  bool in_regime;
} HtBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ht_last_error_message(void);

struct HtSolverOptions ht_solver_options_default(void);

/**
 * Builds an instance from a parent array (`-1` marks the root).
 *
 * # Safety
 * `parents`, `u` and `w` must point to `n` readable elements; `out` must be
 * writable.
 */
enum HtStatus ht_instance_from_parents(const int64_t *parents,
                                       const double *u,
                                       const double *w,
                                       size_t n,
                                       struct HtInstance **out);

/**
 * Parses an instance from the JSON file format.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum HtStatus ht_instance_from_json(const char *json, struct HtInstance **out);

/**
 * Serializes an instance; free the result with [`ht_string_free`].
 *
 * # Safety
 * `inst` must be a live handle; `out` must be writable.
 */
enum HtStatus ht_instance_to_json(const struct HtInstance *inst, char **out);

/**
 * # Safety
 * `s` must come from this library, or be null.
 */
void ht_string_free(char *s);

/**
 * # Safety
 * `inst` must come from this library, or be null.
 */
void ht_instance_free(struct HtInstance *inst);

/**
 * Number of vertices, or 0 for a null handle.
 *
 * # Safety
 * `inst` must be a live handle or null.
 */
size_t ht_instance_len(const struct HtInstance *inst);

/**
 * `out[v] = w(v) Σ_{a <= v} u(a) f(a)`.
 *
 * # Safety
 * `f` and `out` must hold `n` elements, `n` equal to the instance size.
 */
enum HtStatus ht_apply_summation(const struct HtInstance *inst,
                                 const double *f,
                                 size_t n,
                                 double *out);

/**
 * Certified lower estimate of the `l_p -> l_q` norm. `opts` may be null for
 * defaults; `maximizer` may be null, otherwise it receives `n` values.
 *
 * # Safety
 * Pointers must be valid as described.
 */
enum HtStatus ht_operator_norm(const struct HtInstance *inst,
                               double p,
                               double q,
                               const struct HtSolverOptions *opts,
                               struct HtNormResult *out,
                               double *maximizer);

/**
 * As [`ht_operator_norm`], for the `l_q(l_p) -> l_q` norm over depth levels.
 *
 * # Safety
 * Pointers must be valid as described for [`ht_operator_norm`].
 */
enum HtStatus ht_mixed_operator_norm(const struct HtInstance *inst,
                                     double p,
                                     double q,
                                     const struct HtSolverOptions *opts,
                                     struct HtNormResult *out,
                                     double *maximizer);

/**
 * `M = max_v ‖u‖_{p'}([root, v]) ‖w‖_q(T_v)`.
 *
 * # Safety
 * `inst` must be a live handle; `out` must be writable.
 */
enum HtStatus ht_theorem1_bound(const struct HtInstance *inst,
                                double p,
                                double q,
                                struct HtBound *out);

/**
 * Chain criterion for sequences `u`, `w` of length `n`.
 *
 * # Safety
 * `u` and `w` must hold `n` elements; `out` must be writable.
 */
enum HtStatus ht_bennett_bound(const double *u,
                               const double *w,
                               size_t n,
                               double p,
                               double q,
                               struct HtBound *out);

/**
 * Builds and reduces the sigma-partition of `inst`.
 *
 * # Safety
 * `inst` must be a live handle; `out` must be writable.
 */
enum HtStatus ht_partition_build(const struct HtInstance *inst,
                                 double p,
                                 double q,
                                 double sigma,
                                 struct HtPartition **out);

/**
 * Number of blocks, or 0 for a null handle.
 *
 * # Safety
 * `part` must be a live handle or null.
 */
size_t ht_partition_block_count(const struct HtPartition *part);

/**
 * Block index of every vertex.
 *
 * # Safety
 * `out` must hold `n` elements, `n` equal to the instance size.
 */
enum HtStatus ht_partition_membership(const struct HtPartition *part, size_t *out, size_t n);

/**
 * The reduced tree with block weights, as a new instance handle.
 *
 * # Safety
 * `part` must be a live handle; `out` must be writable.
 */
enum HtStatus ht_partition_reduced(const struct HtPartition *part, struct HtInstance **out);

/**
 * Runs every partition check; `all_passed` receives the verdict.
 *
 * # Safety
 * `inst` must be the instance `part` was built from; `all_passed` must be
 * writable.
 */
enum HtStatus ht_partition_verify(const struct HtInstance *inst,
                                  const struct HtPartition *part,
                                  bool *all_passed);

/**
 * # Safety
 * `part` must come from this library, or be null.
 */
void ht_partition_free(struct HtPartition *part);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HARDY_TREE_H */

#ifndef SLICEDMK_H
#define SLICEDMK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum SmkStatus {
  SMK_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SMK_STATUS_NULL_POINTER = 1,
  /**
   * Malformed input: weights, exponents, grid sizes, non-finite values, JSON.
   */
  SMK_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Dimensions of the arguments do not agree.
   */
  SMK_STATUS_DIM_MISMATCH = 3,
  /**
   * An exact solver's size cap was exceeded.
   */
  SMK_STATUS_TOO_LARGE = 4,
  /**
   * The operation requires p <= q.
   */
  SMK_STATUS_HYPOTHESIS_VIOLATED = 5,
  /**
   * Any other library error.
   */
  SMK_STATUS_FAILED = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  SMK_STATUS_PANIC = 7,
} SmkStatus;

/**
 * Opaque set of weighted unit directions.
 */
typedef struct SmkDirections SmkDirections;

/**
 * Opaque weighted point cloud.
 */
typedef struct SmkMeasure SmkMeasure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *smk_version(void);

/**
 * Message of the last failed call on this thread, or NULL if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *smk_last_error(void);

/**
 * Creates a measure from `n` points of dimension `dim`, stored row-major in
 * `points` (`n * dim` values). `weights` holds `n` values summing to 1, or
 * is NULL for equal weights.
 *
 * # Safety
 * `points` must point to `n * dim` readable doubles, `weights` (if not NULL)
 * to `n`, and `out_measure` must be writable.
 */
enum SmkStatus smk_measure_new(size_t dim,
                               size_t n,
                               const double *points,
                               const double *weights,
                               struct SmkMeasure **out_measure);

/**
 * Parses a measure from JSON: `{"dim": 2, "points": [[..], ..], "weights": [..]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_measure` writable.
 */
enum SmkStatus smk_measure_from_json(const char *json, struct SmkMeasure **out_measure);

/**
 * # Safety
 * `measure` must be NULL or a handle from `smk_measure_*` not yet freed.
 */
void smk_measure_free(struct SmkMeasure *measure);

/**
 * Number of atoms, or 0 for NULL.
 *
 * # Safety
 * `measure` must be NULL or a live handle.
 */
size_t smk_measure_len(const struct SmkMeasure *measure);

/**
 * Ambient dimension, or 0 for NULL.
 *
 * # Safety
 * `measure` must be NULL or a live handle.
 */
size_t smk_measure_dim(const struct SmkMeasure *measure);

/**
 * `count` equally spaced directions on the unit circle (a positive multiple of 8).
 *
 * # Safety
 * `out_dirs` must be writable.
 */
enum SmkStatus smk_directions_circle(size_t count, struct SmkDirections **out_dirs);

/**
 * `count` seeded uniform random directions on the sphere in R^dim.
 *
 * # Safety
 * `out_dirs` must be writable.
 */
enum SmkStatus smk_directions_random(size_t dim,
                                     size_t count,
                                     uint64_t seed,
                                     struct SmkDirections **out_dirs);

/**
 * # Safety
 * `dirs` must be NULL or a handle from `smk_directions_*` not yet freed.
 */
void smk_directions_free(struct SmkDirections *dirs);

/**
 * Number of directions, or 0 for NULL.
 *
 * # Safety
 * `dirs` must be NULL or a live handle.
 */
size_t smk_directions_len(const struct SmkDirections *dirs);

/**
 * Sliced distance MK_{p,q}(mu, nu) under `dirs`.
 *
 * # Safety
 * Handles must be live; `out_value` writable.
 */
enum SmkStatus smk_sliced_distance(const struct SmkMeasure *mu,
                                   const struct SmkMeasure *nu,
                                   double p,
                                   double q,
                                   const struct SmkDirections *dirs,
                                   double *out_value);

/**
 * Exact (unsliced) MK_p between two measures in R^n.
 *
 * Equal-size uniform measures are solved as an assignment (up to 1024
 * atoms); anything else by a transportation LP (up to 64 atoms per side).
 *
 * # Safety
 * Handles must be live; `out_value` writable.
 */
enum SmkStatus smk_wasserstein_exact(const struct SmkMeasure *mu,
                                     const struct SmkMeasure *nu,
                                     double p,
                                     double *out_value);

/**
 * MK_p between two measures on the line, given as atoms and weights.
 *
 * # Safety
 * Each array must hold as many doubles as its length argument; `out_value` writable.
 */
enum SmkStatus smk_wasserstein_1d(const double *atoms_a,
                                  const double *weights_a,
                                  size_t len_a,
                                  const double *atoms_b,
                                  const double *weights_b,
                                  size_t len_b,
                                  double p,
                                  double *out_value);

/**
 * M_{q,n} = ‖ω ↦ |ω_1|‖_{L^q} under `dirs`.
 *
 * # Safety
 * `dirs` must be live; `out_value` writable.
 */
enum SmkStatus smk_m_constant(double q, const struct SmkDirections *dirs, double *out_value);

/**
 * Builds a dual certificate (p <= q) and returns it as a JSON string, to be
 * released with [`smk_string_free`]. `out_gap`, if not NULL, receives
 * primal − dual value.
 *
 * # Safety
 * Handles must be live; `out_json` writable; `out_gap` NULL or writable.
 */
enum SmkStatus smk_certificate_json(const struct SmkMeasure *mu,
                                    const struct SmkMeasure *nu,
                                    double p,
                                    double q,
                                    const struct SmkDirections *dirs,
                                    char **out_json,
                                    double *out_gap);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void smk_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SLICEDMK_H */

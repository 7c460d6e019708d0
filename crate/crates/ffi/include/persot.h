#ifndef PERSOT_H
#define PERSOT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PERSOT_OK 0

/**
 * A required pointer argument was null.
 */
#define PERSOT_NULL_POINTER 1

/**
 * Invalid point, mass, exponent, weights or other argument.
 */
#define PERSOT_INVALID_ARGUMENT 2

/**
 * An operation needing integer multiplicities got a fractional mass.
 */
#define PERSOT_NON_INTEGER_MASS 3

/**
 * The exact barycenter program would be too large.
 */
#define PERSOT_TOO_LARGE 4

/**
 * A solver failed.
 */
#define PERSOT_NUMERICAL 5

/**
 * The output buffer is too small; the required length was written.
 */
#define PERSOT_BUFFER_TOO_SMALL 6

/**
 * Internal error (a caught panic).
 */
#define PERSOT_INTERNAL 7

/**
 * Opaque persistence measure.
 */
typedef struct PersotMeasure PersotMeasure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The string stays
 * valid until the next failing call on the same thread.
 */
const char *persot_last_error(void);

/**
 * Builds a measure from `len` atoms. `masses` may be null for unit masses.
 *
 * # Safety
 * Non-null arrays must hold `len` elements; `out` must be writable.
 */
int32_t persot_measure_new(const double *births,
                           const double *deaths,
                           const double *masses,
                           size_t len,
                           struct PersotMeasure **out);

/**
 * Releases a measure. Null is ignored.
 *
 * # Safety
 * `mu` must come from this library and not be used afterwards.
 */
void persot_measure_free(struct PersotMeasure *mu);

/**
 * Number of distinct atoms (0 for null).
 *
 * # Safety
 * `mu` must be null or a live handle.
 */
size_t persot_measure_len(const struct PersotMeasure *mu);

/**
 * Total mass (0 for null).
 *
 * # Safety
 * `mu` must be null or a live handle.
 */
double persot_measure_total_mass(const struct PersotMeasure *mu);

/**
 * Copies the atoms into caller arrays of length `capacity`. With too small a
 * capacity, writes the required length to `len_out` and returns
 * `PERSOT_BUFFER_TOO_SMALL`.
 *
 * # Safety
 * Arrays must hold `capacity` elements; `len_out` must be writable.
 */
int32_t persot_measure_atoms(const struct PersotMeasure *mu,
                             double *births,
                             double *deaths,
                             double *masses,
                             size_t capacity,
                             size_t *len_out);

/**
 * Total persistence `Pers_p`; `p = INFINITY` gives the largest diagonal
 * distance.
 *
 * # Safety
 * `mu` must be a live handle and `out` writable.
 */
int32_t persot_pers(const struct PersotMeasure *mu, double p, double *out);

/**
 * `OT_p` distance; `p = INFINITY` gives the bottleneck distance.
 *
 * # Safety
 * `a`, `b` must be live handles and `out` writable.
 */
int32_t persot_ot_distance(const struct PersotMeasure *a,
                           const struct PersotMeasure *b,
                           double p,
                           double *out);

/**
 * Bottleneck distance between diagrams with integer masses.
 *
 * # Safety
 * `a`, `b` must be live handles and `out` writable.
 */
int32_t persot_bottleneck_distance(const struct PersotMeasure *a,
                                   const struct PersotMeasure *b,
                                   double *out);

/**
 * Fréchet mean by multi-start alternating minimization. `weights` may be
 * null for uniform weights. On success `*out` owns a new measure and
 * `*energy` (if non-null) receives its energy.
 *
 * # Safety
 * `inputs` must hold `count` live handles, `weights` null or `count` values.
 */
int32_t persot_barycenter(const struct PersotMeasure *const *inputs,
                          const double *weights,
                          size_t count,
                          double p,
                          size_t random_starts,
                          uint64_t seed,
                          struct PersotMeasure **out,
                          double *energy);

/**
 * Exact Fréchet mean by linear programming (small integer diagrams).
 * `*integral` (if non-null) is set to 1 when the optimum has integer masses.
 *
 * # Safety
 * As for `persot_barycenter`.
 */
int32_t persot_barycenter_exact(const struct PersotMeasure *const *inputs,
                                const double *weights,
                                size_t count,
                                double p,
                                struct PersotMeasure **out,
                                double *energy,
                                int32_t *integral);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERSOT_H */

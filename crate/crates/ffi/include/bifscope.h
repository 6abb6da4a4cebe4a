#ifndef BIFSCOPE_H
#define BIFSCOPE_H

/* Generated by cbindgen from the bifscope-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible call.
typedef enum BifStatus {
  // Success.
  BIF_STATUS_OK = 0,
  // Expression could not be parsed.
  BIF_STATUS_SYNTAX = 1,
  // Invalid configuration (bad window, degree < 2, ...).
  BIF_STATUS_CONFIG = 2,
  // The family degenerates at the requested parameter.
  BIF_STATUS_DEGENERATE = 3,
  // A numeric routine failed to converge.
  BIF_STATUS_NUMERIC = 4,
  // A required pointer argument was null.
  BIF_STATUS_NULL_ARGUMENT = 5,
} BifStatus;

// Opaque handle: a validated family `f_lambda` plus its marked point.
typedef struct BifFamily BifFamily;

// Opaque handle: a grid measure on a parameter window.
typedef struct BifGridMeasure BifGridMeasure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message for this thread; valid until the next failing call.
const char *bif_last_error_message(void);

// Build a family from map and marked-point expressions over the window
// `[re_min, re_max] x [im_min, im_max]`. On success `*out` owns the
// handle; release it with `bif_family_free`.
//
// # Safety
// `map` and `marked` must be valid NUL-terminated UTF-8 strings; `out`
// must be a valid pointer.
enum BifStatus bif_family_new(const char *map,
                              const char *marked,
                              double re_min,
                              double re_max,
                              double im_min,
                              double im_max,
                              struct BifFamily **out);

// Release a family handle (null is a no-op).
//
// # Safety
// `h` must be a pointer previously returned by `bif_family_new`.
void bif_family_free(struct BifFamily *h);

// Algebraic degree of the family (0 on null input).
//
// # Safety
// `h` must be a live family handle or null.
size_t bif_family_degree(const struct BifFamily *h);

// Bifurcation potential `g(lambda) = G_lambda(a(lambda))` at one
// parameter, to truncation tolerance `tol`.
//
// # Safety
// `h` must be a live family handle; `out_value` a valid pointer.
enum BifStatus bif_potential(const struct BifFamily *h,
                             double lambda_re,
                             double lambda_im,
                             double tol,
                             double *out_value);

// Compute the bifurcation measure of the pair on the family window at
// `res x res` nodes. On success `*out` owns the handle.
//
// # Safety
// `h` must be a live family handle; `out` a valid pointer.
enum BifStatus bif_measure_compute(const struct BifFamily *h,
                                   size_t res,
                                   double tol,
                                   struct BifGridMeasure **out);

// Release a grid-measure handle (null is a no-op).
//
// # Safety
// `h` must be a pointer previously returned by `bif_measure_compute`.
void bif_measure_free(struct BifGridMeasure *h);

// Grid width in nodes (0 on null input).
//
// # Safety
// `h` must be a live grid-measure handle or null.
size_t bif_measure_width(const struct BifGridMeasure *h);

// Grid height in nodes (0 on null input).
//
// # Safety
// `h` must be a live grid-measure handle or null.
size_t bif_measure_height(const struct BifGridMeasure *h);

// Total mass (NaN on null input).
//
// # Safety
// `h` must be a live grid-measure handle or null.
double bif_measure_total_mass(const struct BifGridMeasure *h);

// Cell mass at column `i`, row `j` (NaN when out of range).
//
// # Safety
// `h` must be a live grid-measure handle or null.
double bif_measure_cell(const struct BifGridMeasure *h, size_t i, size_t j);

// Write the measure in the BIFM binary grid format.
//
// # Safety
// `h` must be a live grid-measure handle; `path` a NUL-terminated
// UTF-8 path.
enum BifStatus bif_measure_write(const struct BifGridMeasure *h, const char *path);

// Monte Carlo Lyapunov exponent of `mu_{f_lambda}`.
//
// # Safety
// `h` must be a live family handle; `out_l` and `out_std_err` valid
// pointers.
enum BifStatus bif_lyapunov(const struct BifFamily *h,
                            double lambda_re,
                            double lambda_im,
                            size_t samples,
                            uint64_t seed,
                            double *out_l,
                            double *out_std_err);

// Newton solve for a Misiurewicz parameter from a seed; on success the
// certified parameter, cycle multiplier, transversality and residual
// are written to the output pointers (any may be null to skip).
//
// # Safety
// `h` must be a live family handle; non-null outputs must be valid.
enum BifStatus bif_misiurewicz_solve(const struct BifFamily *h,
                                     double seed_re,
                                     double seed_im,
                                     size_t n,
                                     size_t p,
                                     double *out_lambda_re,
                                     double *out_lambda_im,
                                     double *out_rho_re,
                                     double *out_rho_im,
                                     double *out_trans_re,
                                     double *out_trans_im,
                                     double *out_residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIFSCOPE_H */

#ifndef FINSLERLAB_H
#define FINSLERLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum {
  FL_STATUS_OK = 0,
  FL_STATUS_NULL_POINTER = 1,
  FL_STATUS_INVALID_UTF8 = 2,
  FL_STATUS_PARSE = 3,
  FL_STATUS_INVALID_ARGUMENT = 4,
  // The sample lies outside the metric domain or on a singular set.
  FL_STATUS_DOMAIN = 5,
  FL_STATUS_MANIFEST = 6,
  FL_STATUS_PANIC = 7,
} FlStatus;

// Opaque metric handle.
typedef struct FlMetric FlMetric;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fl_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into the library from the same thread.
const char *fl_last_error_message(void);

// p-power metric `F = alpha (1 + beta/alpha)^p`.
//
// `a` holds `dim * dim` row-major expressions for `a_ij`; `b` holds `dim`
// expressions for `b_i`.
//
// # Safety
// `a` and `b` must point to that many valid C strings; `out` must be writable.
FlStatus fl_metric_ppower(size_t dim,
                          const char *const *a,
                          const char *const *b,
                          double p,
                          FlMetric **out);

// Two-dimensional square-root metric built from `(u, v, B)`.
//
// # Safety
// `u`, `v`, `b` must be valid C strings; `out` must be writable.
FlStatus fl_metric_sqrt2d(const char *u, const char *v, const char *b, FlMetric **out);

// Releases a handle; NULL is ignored.
//
// # Safety
// `m` must come from a constructor of this library and not be used again.
void fl_metric_free(FlMetric *m);

// Dimension of the metric, or 0 for NULL.
//
// # Safety
// `m` must be NULL or a live handle.
size_t fl_metric_dim(const FlMetric *m);

// `F(x, y)`.
//
// # Safety
// `m` must be a live handle, `x` and `y` `dim`-length arrays, `out` writable.
FlStatus fl_metric_value(const FlMetric *m, const double *x, const double *y, double *out);

// Geodesic coefficients `G^i(x, y)` written to `out[0..dim]`.
//
// # Safety
// `m` must be a live handle and all arrays `dim` long.
FlStatus fl_metric_spray(const FlMetric *m, const double *x, const double *y, double *out);

// Ricci curvature `Ric(x, y)`.
//
// # Safety
// As for [`fl_metric_value`].
FlStatus fl_metric_ricci(const FlMetric *m, const double *x, const double *y, double *out);

// Einstein scalar `lambda = Ric / ((n - 1) F^2)`.
//
// # Safety
// As for [`fl_metric_value`].
FlStatus fl_metric_einstein_scalar(const FlMetric *m,
                                   const double *x,
                                   const double *y,
                                   double *out);

// Flag curvature of the plane spanned by `y` and `u` at `x`.
//
// # Safety
// As for [`fl_metric_value`]; `u` is also `dim` long.
FlStatus fl_metric_flag_curvature(const FlMetric *m,
                                  const double *x,
                                  const double *y,
                                  const double *u,
                                  double *out);

// Runs a JSON manifest and returns the JSON report in `*out_json`, to be
// released with [`fl_string_free`]. `*out_verdict` is 1 when every check
// passed and 0 otherwise.
//
// # Safety
// `manifest_json` must be a valid C string; outputs must be writable.
FlStatus fl_run_manifest(const char *manifest_json, char **out_json, int32_t *out_verdict);

// Releases a string returned by this library; NULL is ignored.
//
// # Safety
// `s` must come from this library and not be used again.
void fl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FINSLERLAB_H */

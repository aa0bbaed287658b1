#ifndef GOLA_H
#define GOLA_H

#include <stddef.h>
#include <stdint.h>
/* Generated by cbindgen from crates/ffi/src; do not edit. */

/*
 Result code of every exported function.
 */
typedef enum GolaStatus {
  GOLA_STATUS_OK = 0,
  GOLA_STATUS_NULL_POINTER = 1,
  GOLA_STATUS_INVALID_ARGUMENT = 2,
  GOLA_STATUS_DIMENSION_MISMATCH = 3,
  GOLA_STATUS_DERIVATIVE = 4,
  GOLA_STATUS_SINGULAR = 5,
  GOLA_STATUS_REJECTED_START = 6,
  GOLA_STATUS_NO_MODES_FOUND = 7,
  GOLA_STATUS_DEGENERATE_MODE = 8,
  GOLA_STATUS_SCALING = 9,
  GOLA_STATUS_UNSUPPORTED = 10,
  GOLA_STATUS_GENERATION = 11,
  GOLA_STATUS_DEGENERATE_OUTPUT = 12,
  GOLA_STATUS_MODEL_FAILURE = 13,
  GOLA_STATUS_CONFIG = 14,
  GOLA_STATUS_IO = 15,
  GOLA_STATUS_JSON = 16,
  GOLA_STATUS_UTF8 = 17,
  GOLA_STATUS_BUFFER_TOO_SMALL = 18,
  GOLA_STATUS_PANIC = 19,
} GolaStatus;

/*
 Opaque Gaussian mixture.
 */
typedef struct GolaMixture GolaMixture;

/*
 Opaque pipeline result.
 */
typedef struct GolaReport GolaReport;

/*
 Unnormalized log density `log φ(z)` supplied by the caller. Called
 concurrently from several threads; return `-INFINITY` outside the
 support.
 */
typedef double (*GolaLogDensityFn)(const double *z, size_t dim, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on this thread.
 */
const char *gola_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *gola_version(void);

/*
 Release a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void gola_string_free(char *s);

/*
 Parse a mixture from its JSON form.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum GolaStatus gola_mixture_from_json(const char *json, struct GolaMixture **out);

/*
 Serialize a mixture to JSON. Free the result with [`gola_string_free`].

 # Safety
 `mixture` must be a live handle; `out` must be writable.
 */
enum GolaStatus gola_mixture_to_json(const struct GolaMixture *mixture, char **out);

/*
 Dimension and component count of a mixture. Either out-pointer may be null.

 # Safety
 `mixture` must be a live handle.
 */
enum GolaStatus gola_mixture_shape(const struct GolaMixture *mixture,
                                   size_t *dim,
                                   size_t *n_components);

/*
 Copy the mixture weights into `out[0..len]`; `len` must equal the
 component count.

 # Safety
 `mixture` must be a live handle; `out` must hold `len` doubles.
 */
enum GolaStatus gola_mixture_weights(const struct GolaMixture *mixture, double *out, size_t len);

/*
 Normalized log density at `z[0..dim]`.

 # Safety
 `mixture` must be a live handle; `z` must hold `dim` doubles; `out`
 must be writable.
 */
enum GolaStatus gola_mixture_log_pdf(const struct GolaMixture *mixture,
                                     const double *z,
                                     size_t dim,
                                     double *out);

/*
 Draw `n` samples into `out` as an `n × dim` row-major array;
 `out_len` must be at least `n * dim`.

 # Safety
 `mixture` must be a live handle; `out` must hold `out_len` doubles.
 */
enum GolaStatus gola_mixture_sample(const struct GolaMixture *mixture,
                                    size_t n,
                                    uint64_t seed,
                                    double *out,
                                    size_t out_len);

/*
 Release a mixture handle. Null is ignored.

 # Safety
 `mixture` must come from this library and not have been freed.
 */
void gola_mixture_free(struct GolaMixture *mixture);

/*
 Monte Carlo Jensen-Shannon divergence in bits, `n` draws from each
 side. `std_error` may be null.

 # Safety
 `p` and `q` must be live handles; `value` must be writable.
 */
enum GolaStatus gola_jsd(const struct GolaMixture *p,
                         const struct GolaMixture *q,
                         size_t n,
                         uint64_t seed,
                         double *value,
                         double *std_error);

/*
 Default pipeline settings as JSON, a template for [`gola_run`].

 # Safety
 `out` must be writable.
 */
enum GolaStatus gola_config_default_json(char **out);

/*
 Fit a Gaussian mixture to the caller's log density on the box
 `[lower, upper]`. `config_json` may be null for defaults; unknown keys
 are rejected. NaN returned by the callback is treated as `-INFINITY`.

 # Safety
 `log_density` must be callable from several threads at once with
 `user_data`; `lower` and `upper` must hold `dim` doubles; `out` must be
 writable.
 */
enum GolaStatus gola_run(GolaLogDensityFn log_density,
                         void *user_data,
                         size_t dim,
                         const double *lower,
                         const double *upper,
                         const char *config_json,
                         struct GolaReport **out);

/*
 Copy of the fitted mixture as a new handle.

 # Safety
 `report` must be a live handle; `out` must be writable.
 */
enum GolaStatus gola_report_mixture(const struct GolaReport *report, struct GolaMixture **out);

/*
 Natural log of the evidence estimate.

 # Safety
 `report` must be a live handle; `out` must be writable.
 */
enum GolaStatus gola_report_log_evidence(const struct GolaReport *report, double *out);

/*
 Full report as JSON. Free the result with [`gola_string_free`].

 # Safety
 `report` must be a live handle; `out` must be writable.
 */
enum GolaStatus gola_report_to_json(const struct GolaReport *report, char **out);

/*
 Release a report handle. Null is ignored.

 # Safety
 `report` must come from this library and not have been freed.
 */
void gola_report_free(struct GolaReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GOLA_H */

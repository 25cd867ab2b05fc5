#ifndef RECLQR_H
#define RECLQR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ReclqrStatus {
  RECLQR_STATUS_OK = 0,
  RECLQR_STATUS_NULL_POINTER = 1,
  RECLQR_STATUS_INVALID_UTF8 = 2,
  RECLQR_STATUS_PARSE = 3,
  RECLQR_STATUS_DIMENSION = 4,
  RECLQR_STATUS_INVALID_MODEL = 5,
  RECLQR_STATUS_INVALID_GRAPH = 6,
  RECLQR_STATUS_SINGULAR = 7,
  RECLQR_STATUS_NUMERICAL = 8,
  RECLQR_STATUS_UNSUPPORTED = 9,
  RECLQR_STATUS_OUT_OF_RANGE = 10,
  RECLQR_STATUS_NO_CONTROLLER = 11,
  RECLQR_STATUS_BUFFER_TOO_SMALL = 12,
  RECLQR_STATUS_IO = 13,
  RECLQR_STATUS_PANIC = 14,
} ReclqrStatus;

typedef enum ReclqrRegime {
  RECLQR_REGIME_STRICTLY_CONVEX = 0,
  RECLQR_REGIME_SEMIDEFINITE_DETECTABLE = 1,
  RECLQR_REGIME_SEMIDEFINITE_UNDETECTABLE = 2,
  RECLQR_REGIME_INDEFINITE = 3,
} ReclqrRegime;

/**
 * Synthesized controller.
 */
typedef struct ReclqrController ReclqrController;

/**
 * Assembled model, weights and simulation settings.
 */
typedef struct ReclqrScenario ReclqrScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the next failing call.
 */
const char *reclqr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *reclqr_version(void);

/**
 * Builds a scenario from a JSON document. Relative paths resolve against
 * `base_dir`, which may be null for the current directory.
 *
 * # Safety
 * `json` and `base_dir` must be null or NUL-terminated; `out` must be writable.
 */
enum ReclqrStatus reclqr_scenario_from_json(const char *json,
                                            const char *base_dir,
                                            struct ReclqrScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum ReclqrStatus reclqr_scenario_from_file(const char *path, struct ReclqrScenario **out);

/**
 * # Safety
 * `s` must come from a `reclqr_scenario_from_*` call and not be used afterwards.
 */
void reclqr_scenario_free(struct ReclqrScenario *s);

/**
 * State dimension `n·m`.
 *
 * # Safety
 * `s` must be a live scenario handle and `dim` writable.
 */
enum ReclqrStatus reclqr_scenario_dim(const struct ReclqrScenario *s, size_t *dim);

/**
 * Classifies the weights. A nonpositive `tol` selects the default.
 *
 * # Safety
 * `s` must be a live scenario handle; `regime` writable; `margin` may be null.
 */
enum ReclqrStatus reclqr_scenario_classify(const struct ReclqrScenario *s,
                                           double tol,
                                           enum ReclqrRegime *regime,
                                           double *margin);

/**
 * Classifies and synthesizes. A controller handle is returned even when no
 * optimal gain exists; query it with `reclqr_controller_has_gain`.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` writable.
 */
enum ReclqrStatus reclqr_synthesize(const struct ReclqrScenario *s, struct ReclqrController **out);

/**
 * # Safety
 * `c` must come from `reclqr_synthesize` and not be used afterwards.
 */
void reclqr_controller_free(struct ReclqrController *c);

/**
 * Writes 1 if the controller carries a feedback gain, else 0.
 *
 * # Safety
 * `c` must be a live controller handle and `has_gain` writable.
 */
enum ReclqrStatus reclqr_controller_has_gain(const struct ReclqrController *c, int *has_gain);

/**
 * Regime the controller was synthesized for.
 *
 * # Safety
 * `c` must be a live controller handle and `regime` writable.
 */
enum ReclqrStatus reclqr_controller_regime(const struct ReclqrController *c,
                                           enum ReclqrRegime *regime);

/**
 * Copies the gain `K` (row-major, `dim × dim`) of `u = −Kx + b`.
 *
 * # Safety
 * `c` must be a live controller handle; `k` must hold `len` doubles.
 */
enum ReclqrStatus reclqr_controller_gain(const struct ReclqrController *c, double *k, size_t len);

/**
 * Copies the offset `b` of `u = −Kx + b`.
 *
 * # Safety
 * `c` must be a live controller handle; `b` must hold `len` doubles.
 */
enum ReclqrStatus reclqr_controller_offset(const struct ReclqrController *c, double *b, size_t len);

/**
 * Copies the Riccati-type matrix behind the gain (row-major).
 *
 * # Safety
 * `c` must be a live controller handle; `p` must hold `len` doubles.
 */
enum ReclqrStatus reclqr_controller_riccati(const struct ReclqrController *c,
                                            double *p,
                                            size_t len);

/**
 * Evaluates `u = −Kx + b`.
 *
 * # Safety
 * `c` must be a live controller handle; `x` and `u` must hold `len` doubles.
 */
enum ReclqrStatus reclqr_controller_input(const struct ReclqrController *c,
                                          const double *x,
                                          double *u,
                                          size_t len);

/**
 * Closed-loop eigenvalues; `count` receives how many were written.
 *
 * # Safety
 * `c` must be a live controller handle; `re` and `im` must hold `len` doubles.
 */
enum ReclqrStatus reclqr_controller_spectrum(const struct ReclqrController *c,
                                             double *re,
                                             double *im,
                                             size_t len,
                                             size_t *count);

/**
 * Controller as a JSON document. Release with `reclqr_string_free`.
 *
 * # Safety
 * `c` must be a live controller handle and `out` writable.
 */
enum ReclqrStatus reclqr_controller_to_json(const struct ReclqrController *c, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void reclqr_string_free(char *s);

/**
 * Reproduces built-in example `which` (1, 2 or 3). `params_json` is null or
 * an object such as `{"eta": 1.0}`. Writes 1 to `passed` iff every check passed.
 *
 * # Safety
 * `params_json` must be null or NUL-terminated; `passed` writable.
 */
enum ReclqrStatus reclqr_example_run(int which, const char *params_json, int *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECLQR_H */

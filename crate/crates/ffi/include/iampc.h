#ifndef IAMPC_H
#define IAMPC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IampcStatus {
  IAMPC_STATUS_OK = 0,
  IAMPC_STATUS_NULL_POINTER = 1,
  IAMPC_STATUS_INVALID_INPUT = 2,
  IAMPC_STATUS_DIMENSION_MISMATCH = 3,
  IAMPC_STATUS_CONTROLLER_INFEASIBLE = 4,
  IAMPC_STATUS_INITIAL_STATE_OUTSIDE = 5,
  IAMPC_STATUS_ASSUMPTION_VIOLATION = 6,
  IAMPC_STATUS_SET_COMPUTATION = 7,
  IAMPC_STATUS_NUMERICAL = 8,
  IAMPC_STATUS_ARTIFACT_MISMATCH = 9,
  IAMPC_STATUS_IO = 10,
  IAMPC_STATUS_PARSE = 11,
  IAMPC_STATUS_PANIC = 12,
} IampcStatus;

// Closed-loop controller with its design artifacts.
typedef struct IampcController IampcController;

// Least-squares parameter estimator.
typedef struct IampcEstimator IampcEstimator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next call on the same thread.
const char *iampc_last_error(void);

// Library version as a static NUL-terminated string.
const char *iampc_version(void);

// Build a controller by solving the design and set computations for a
// scenario file, or for the default benchmark scenario if `config_path` is null.
//
// # Safety
// `config_path` must be null or a NUL-terminated string; `out` must be valid
// for writes.
enum IampcStatus iampc_controller_from_config(const char *config_path,
                                              struct IampcController **out);

// Load a controller from a model file, a design file and a set-suite
// directory as written by the `iampc` CLI.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be valid for writes.
enum IampcStatus iampc_controller_load(const char *model_path,
                                       const char *design_path,
                                       const char *suite_dir,
                                       struct IampcController **out);

// # Safety
// `ctrl` must be null or a handle from this library not yet freed.
void iampc_controller_free(struct IampcController *ctrl);

// State, input and parameter dimensions and the horizon.
//
// # Safety
// `ctrl` must be a live handle; output pointers may be null.
enum IampcStatus iampc_controller_dims(const struct IampcController *ctrl,
                                       size_t *n,
                                       size_t *m,
                                       size_t *ell,
                                       size_t *horizon);

// Advance the parameter buffer with `xi` and compute the input for state `x`.
// `value` receives the optimal cost and may be null. On failure the
// controller is left unchanged.
//
// # Safety
// `ctrl` must be a live handle; arrays must hold the stated lengths.
enum IampcStatus iampc_controller_step(struct IampcController *ctrl,
                                       const double *x,
                                       size_t n,
                                       const double *xi,
                                       size_t ell,
                                       double *u,
                                       size_t m,
                                       double *value);

// Optimal cost at `x` for the current buffer, without advancing it.
//
// # Safety
// `ctrl` must be a live handle; `x` must hold `n` values and `value` be
// valid for writes.
enum IampcStatus iampc_controller_value(const struct IampcController *ctrl,
                                        const double *x,
                                        size_t n,
                                        double *value);

// Estimator for the controller's model, starting from the uniform weights.
//
// # Safety
// `ctrl` must be a live handle; `out` must be valid for writes.
enum IampcStatus iampc_estimator_new(const struct IampcController *ctrl,
                                     size_t window,
                                     double gain,
                                     double ridge,
                                     struct IampcEstimator **out);

// # Safety
// `est` must be null or a handle from this library not yet freed.
void iampc_estimator_free(struct IampcEstimator *est);

// Feed one observed transition and write the new estimate to `xi`.
//
// # Safety
// Handles must be live; arrays must hold the stated lengths.
enum IampcStatus iampc_estimator_step(struct IampcEstimator *est,
                                      const struct IampcController *ctrl,
                                      const double *x_prev,
                                      const double *u_prev,
                                      const double *x_next,
                                      double *xi,
                                      size_t ell);

// Current estimate without feeding data.
//
// # Safety
// `est` must be a live handle; `xi` must hold `ell` values.
enum IampcStatus iampc_estimator_current(const struct IampcEstimator *est, double *xi, size_t ell);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IAMPC_H */

#ifndef WMINAV_H
#define WMINAV_H

/* Generated by cbindgen from the wminav-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes shared with the CLI exit codes.
 */
typedef enum WminavStatus {
  WminavStatus_Ok = 0,
  WminavStatus_InvalidArgument = 1,
  WminavStatus_DataError = 2,
  WminavStatus_NumericError = 3,
} WminavStatus;

/**
 * Opaque displacement-regressor handle.
 */
typedef struct WminavModel WminavModel;

/**
 * Opaque planar trajectory handle.
 */
typedef struct WminavTrajectory WminavTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *wminav_last_error(void);

/**
 * Library version as a static string.
 */
const char *wminav_version(void);

/**
 * Loads a `t,x,y` trajectory CSV into a new handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum WminavStatus wminav_trajectory_load_csv(const char *path, struct WminavTrajectory **out);

/**
 * Releases a trajectory handle. A null pointer is a no-op.
 *
 * # Safety
 * `handle` must be null or a pointer previously returned by this library.
 */
void wminav_trajectory_free(struct WminavTrajectory *handle);

/**
 * Number of points in a trajectory.
 *
 * # Safety
 * `handle` must be a valid trajectory handle.
 */
uintptr_t wminav_trajectory_len(const struct WminavTrajectory *handle);

/**
 * Reads one trajectory point.
 *
 * # Safety
 * `handle` must be valid; `t`, `x`, `y` must be valid pointers.
 */
enum WminavStatus wminav_trajectory_point(const struct WminavTrajectory *handle,
                                          uintptr_t index,
                                          double *t,
                                          double *x,
                                          double *y);

/**
 * Generates a synthetic session directory (stationary prologue, smooth
 * ramps, periodic motion). `noise` of 0 disables the sensor error model.
 *
 * # Safety
 * `out_dir` must be a valid NUL-terminated string.
 */
enum WminavStatus wminav_simulate_session(const char *out_dir,
                                          double speed_mps,
                                          double amplitude_m,
                                          double frequency_hz,
                                          double duration_s,
                                          uint64_t seed,
                                          int noise);

/**
 * Dead-reckons one wheel stream of a session directory. On success `est`
 * receives the mechanized trajectory and `truth` the RTK-derived wheel
 * track over the same span.
 *
 * # Safety
 * `session_dir` and `wheel` must be valid strings; `est` and `truth` valid
 * pointers.
 */
enum WminavStatus wminav_mechanize_session(const char *session_dir,
                                           const char *wheel,
                                           int planar_2d,
                                           struct WminavTrajectory **est,
                                           struct WminavTrajectory **truth);

/**
 * Position RMSE between a ground-truth and an estimated trajectory, m.
 *
 * # Safety
 * Both handles and `out` must be valid.
 */
enum WminavStatus wminav_prmse(const struct WminavTrajectory *gt,
                               const struct WminavTrajectory *est,
                               double *out);

/**
 * Total distance error in percent from a PRMSE and a trajectory length.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WminavStatus wminav_tde(double prmse_m, double length_m, double *out);

/**
 * Loads a displacement-regressor checkpoint.
 *
 * # Safety
 * `path` must be a valid string and `out` a valid pointer.
 */
enum WminavStatus wminav_model_load(const char *path, struct WminavModel **out);

/**
 * Releases a model handle. A null pointer is a no-op.
 *
 * # Safety
 * `handle` must be null or a pointer previously returned by this library.
 */
void wminav_model_free(struct WminavModel *handle);

/**
 * IMU samples per input window of a loaded model.
 *
 * # Safety
 * `handle` must be a valid model handle.
 */
uintptr_t wminav_model_window(const struct WminavModel *handle);

/**
 * Displacement intervals per output of a loaded model.
 *
 * # Safety
 * `handle` must be a valid model handle.
 */
uintptr_t wminav_model_intervals(const struct WminavModel *handle);

/**
 * Runs the regressor on one window. `acc` and `gyro` hold `3 x window`
 * row-major values (axis-major); `deltas_out` receives `2 x intervals`
 * values as (dx, dy) pairs.
 *
 * # Safety
 * `handle` must be valid; the arrays must match the model's window and
 * interval sizes.
 */
enum WminavStatus wminav_model_infer(const struct WminavModel *handle,
                                     const double *acc,
                                     const double *gyro,
                                     double *deltas_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WMINAV_H */

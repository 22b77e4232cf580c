#ifndef MMG_TELEOP_H
#define MMG_TELEOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmgStatus {
  MMG_STATUS_OK = 0,
  MMG_STATUS_NULL_POINTER = 1,
  MMG_STATUS_INVALID_ARGUMENT = 2,
  MMG_STATUS_REJECTED = 3,
  MMG_STATUS_IO = 4,
  MMG_STATUS_CHECKPOINT = 5,
  MMG_STATUS_RUNTIME = 6,
  MMG_STATUS_PANIC = 7,
} MmgStatus;

/**
 * Trained classifier.
 */
typedef struct MmgClassifier MmgClassifier;

/**
 * Live session with the default setup and course.
 */
typedef struct MmgSession MmgSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the buffer size needed for the
 * whole message.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mmg_last_error(char *buf, size_t len);

/**
 * Savitzky-Golay smoothing of `n` samples into `out` (also `n` samples).
 *
 * # Safety
 * `x` and `out` must point to `n` valid doubles.
 */
enum MmgStatus mmg_savgol(const double *x, size_t n, size_t window, size_t order, double *out);

/**
 * Squeeze force needed to hold an object of `mass_g` grams with surface
 * roughness `ra_um`.
 *
 * # Safety
 * `out` must point to a writable double.
 */
enum MmgStatus mmg_required_grip_force(double mass_g, double ra_um, double *out);

/**
 * Vibration cue 1..=8 for a grip force.
 *
 * # Safety
 * `out` must point to a writable byte.
 */
enum MmgStatus mmg_force_to_feedback(double force_n,
                                     bool slip,
                                     bool over_force,
                                     double f_max_n,
                                     uint8_t *out);

/**
 * Loads a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MmgStatus mmg_classifier_load(const char *path, struct MmgClassifier **out);

/**
 * Input shape expected by the classifier.
 *
 * # Safety
 * `c` must be a live handle; outputs must be writable.
 */
enum MmgStatus mmg_classifier_shape(const struct MmgClassifier *c,
                                    size_t *channels,
                                    size_t *window_len,
                                    size_t *classes);

/**
 * Classifies one raw window stored channel-major (`channels * len` doubles).
 * Writes the class index and, when `probs` is not null, `probs_len`
 * class probabilities.
 *
 * # Safety
 * `samples` must point to `channels * len` doubles, `class_index` to a
 * writable u32 and `probs` (if not null) to `probs_len` writable doubles.
 */
enum MmgStatus mmg_classifier_predict(const struct MmgClassifier *c,
                                      const double *samples,
                                      size_t channels,
                                      size_t len,
                                      double sample_rate_hz,
                                      uint32_t *class_index,
                                      double *probs,
                                      size_t probs_len);

/**
 * # Safety
 * `c` must be null or a handle from [`mmg_classifier_load`] not yet freed.
 */
void mmg_classifier_free(struct MmgClassifier *c);

/**
 * Starts a session on the built-in course and catalog.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum MmgStatus mmg_session_new(uint64_t seed, double telemetry_hz, struct MmgSession **out);

/**
 * Applies one client message in the WebSocket JSON format.
 *
 * # Safety
 * `s` must be a live handle and `json` a NUL-terminated string.
 */
enum MmgStatus mmg_session_apply(struct MmgSession *s, const char *json);

/**
 * Advances the session by `ms` and returns the server messages as a JSON
 * array in `out_json`, to be released with [`mmg_string_free`].
 *
 * # Safety
 * `s` must be a live handle and `out_json` a writable pointer.
 */
enum MmgStatus mmg_session_advance(struct MmgSession *s, int64_t ms, char **out_json);

/**
 * Current session time in milliseconds.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum MmgStatus mmg_session_now_ms(const struct MmgSession *s, int64_t *out);

/**
 * # Safety
 * `s` must be null or a handle from [`mmg_session_new`] not yet freed.
 */
void mmg_session_free(struct MmgSession *s);

/**
 * # Safety
 * `p` must be null or a string returned by this library not yet freed.
 */
void mmg_string_free(char *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMG_TELEOP_H */

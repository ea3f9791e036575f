/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef VOXRESTORE_H
#define VOXRESTORE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible entry point.
 */
typedef enum VrStatus {
  VR_STATUS_OK = 0,
  VR_STATUS_NULL_POINTER = 1,
  VR_STATUS_INVALID_UTF8 = 2,
  VR_STATUS_INVALID_ARGUMENT = 3,
  VR_STATUS_OUT_OF_RANGE = 4,
  VR_STATUS_IO = 5,
  VR_STATUS_FORMAT = 6,
  VR_STATUS_UNVOICED = 7,
  VR_STATUS_INSUFFICIENT_DATA = 8,
  VR_STATUS_BUFFER_TOO_SMALL = 9,
  VR_STATUS_PANIC = 10,
} VrStatus;

/**
 * Opaque mono audio buffer.
 */
typedef struct VrAudio VrAudio;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *vr_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into the library on this
 * thread.
 */
const char *vr_last_error_message(void);

/**
 * Copies `len` samples into a new buffer at `sample_rate` Hz.
 */
enum VrStatus vr_audio_from_samples(const double *samples,
                                    size_t len,
                                    uint32_t sample_rate,
                                    struct VrAudio **out);

/**
 * Reads a mono WAV file (PCM16 or 32-bit float).
 */
enum VrStatus vr_audio_load_wav(const char *path, struct VrAudio **out);

/**
 * Writes the buffer as PCM16, or 32-bit float when `float32` is non-zero.
 */
enum VrStatus vr_audio_save_wav(const struct VrAudio *audio, const char *path, int float32);

/**
 * Number of samples; 0 for a null handle.
 */
size_t vr_audio_len(const struct VrAudio *audio);

/**
 * Sample rate in Hz; 0 for a null handle.
 */
uint32_t vr_audio_sample_rate(const struct VrAudio *audio);

/**
 * Copies all samples into `dst`, which must hold `capacity` values.
 * Fails with `VR_STATUS_BUFFER_TOO_SMALL` when it cannot hold them all.
 */
enum VrStatus vr_audio_copy_samples(const struct VrAudio *audio, double *dst, size_t capacity);

/**
 * Releases a handle. Null is ignored.
 */
void vr_audio_free(struct VrAudio *audio);

/**
 * Applies a disguise given as `family:param`, e.g. `pitch-freq:4` or
 * `vtln-power:-0.2`.
 */
enum VrStatus vr_disguise(const struct VrAudio *audio, const char *spec, struct VrAudio **out);

/**
 * `2^(alpha / 12)`.
 */
double vr_semitone_to_scale(double alpha);

/**
 * `12 log2(scale)`; `scale` must be positive and finite.
 */
enum VrStatus vr_scale_to_semitone(double scale, double *out);

/**
 * Grid-search restoration of `test` against `enroll` with the builtin
 * scorer. `grid` is `start:stop:step`, or null for the family's default
 * grid. On success `*json_out` receives a JSON object with `alpha_hat`,
 * `d_hat`, `family` and `per_candidate`; free it with [`vr_string_free`].
 */
enum VrStatus vr_estimate_grid(const struct VrAudio *enroll,
                               const struct VrAudio *test,
                               const char *family,
                               const char *grid,
                               char **json_out);

/**
 * Pitch parameter from the ratio of mean F0s, snapped to whole semitones.
 * Fails with `VR_STATUS_UNVOICED` when either side has no voiced frames.
 */
enum VrStatus vr_estimate_f0_ratio(const struct VrAudio *enroll,
                                   const struct VrAudio *test,
                                   double *alpha_out);

/**
 * Equal error rate (percent) and its threshold for distance scores, where
 * smaller means more likely the same speaker.
 */
enum VrStatus vr_compute_eer(const double *same,
                             size_t n_same,
                             const double *diff,
                             size_t n_diff,
                             double *eer_percent,
                             double *threshold);

/**
 * Releases a string returned by the library. Null is ignored.
 */
void vr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOXRESTORE_H */

#ifndef MFUSE_H
#define MFUSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MFUSE_INPUT_TWEET_TEXT 1

#define MFUSE_INPUT_IMAGE_TEXT 2

#define MFUSE_INPUT_IMAGE 4

/**
 * Result of every call.
 */
typedef enum MfuseStatus {
  MFUSE_STATUS_OK = 0,
  MFUSE_STATUS_NULL_POINTER = 1,
  MFUSE_STATUS_INVALID_ARGUMENT = 2,
  MFUSE_STATUS_CONFIG = 3,
  MFUSE_STATUS_DATA = 4,
  MFUSE_STATUS_NUMERIC = 5,
  MFUSE_STATUS_METRIC = 6,
  MFUSE_STATUS_IO = 7,
  MFUSE_STATUS_PANIC = 8,
} MfuseStatus;

/**
 * A model and its parameters.
 */
typedef struct MfuseModel MfuseModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mfuse_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, 0 if there is none.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null.
 */
size_t mfuse_last_error(char *buf, size_t len);

/**
 * Creates a freshly initialized model.
 *
 * `variant` is one of `lstm`, `fcm`, `scm`, `tkm`; `profile` one of `desk`,
 * `paper`, `synth` (the synth profile uses 16-pixel images).
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum MfuseStatus mfuse_model_new(const char *variant,
                                 const char *profile,
                                 size_t vocab_size,
                                 uint64_t seed,
                                 struct MfuseModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`mfuse_model_new`] and not be used afterwards.
 */
void mfuse_model_free(struct MfuseModel *model);

/**
 * Number of trainable scalars.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum MfuseStatus mfuse_model_parameter_count(const struct MfuseModel *model, size_t *out);

/**
 * Replaces the parameters with a checkpoint that matches the model exactly.
 *
 * # Safety
 * `model` must be a live handle; `path` NUL-terminated.
 */
enum MfuseStatus mfuse_model_load(struct MfuseModel *model, const char *path);

/**
 * Writes the parameters as a checkpoint file.
 *
 * # Safety
 * `model` must be a live handle; `path` NUL-terminated.
 */
enum MfuseStatus mfuse_model_save(const struct MfuseModel *model, const char *path);

/**
 * Eval-mode hate probabilities for `n` examples.
 *
 * `images` holds `n` RGB images of `height × width × 3` values in `[0, 1]`,
 * row-major; it may be null for the text-only variant. `inputs` is a bit
 * set of `MFUSE_INPUT_*`; unavailable inputs are zero-masked. Scores are
 * written to `out_scores[0..n]`.
 *
 * # Safety
 * Pointers must be valid for the lengths implied by `n`, the offsets and the
 * image size.
 */
enum MfuseStatus mfuse_model_score(const struct MfuseModel *model,
                                   size_t n,
                                   const double *images,
                                   size_t height,
                                   size_t width,
                                   const uint32_t *tweet_tokens,
                                   const size_t *tweet_offsets,
                                   const uint32_t *image_text_tokens,
                                   const size_t *image_text_offsets,
                                   uint32_t inputs,
                                   double *out_scores);

/**
 * Area under the ROC curve; ties count one half. Labels are nonzero for hate.
 *
 * # Safety
 * `scores` and `labels` must hold `n` values; `out` must be writable.
 */
enum MfuseStatus mfuse_auc_roc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Maximum F1 of the hate class over all thresholds, and the threshold
 * reaching it (`out_threshold` may be null).
 *
 * # Safety
 * `scores` and `labels` must hold `n` values; `out_f1` must be writable.
 */
enum MfuseStatus mfuse_max_f1(const double *scores,
                              const uint8_t *labels,
                              size_t n,
                              double *out_f1,
                              double *out_threshold);

/**
 * Mean per-class recall in percent, predicting hate when `score >= threshold`.
 *
 * # Safety
 * `scores` and `labels` must hold `n` values; `out` must be writable.
 */
enum MfuseStatus mfuse_balanced_accuracy(const double *scores,
                                         const uint8_t *labels,
                                         size_t n,
                                         double threshold,
                                         double *out);

/**
 * Inverse-frequency class weights `N / (C · n_c)` for `n_classes` counts.
 *
 * # Safety
 * `counts` and `out` must hold `n_classes` values.
 */
enum MfuseStatus mfuse_class_weights(const size_t *counts, size_t n_classes, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFUSE_H */

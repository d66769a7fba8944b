#ifndef TRAJKIT_H
#define TRAJKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum TkStatus {
  TK_STATUS_OK = 0,
  TK_STATUS_NULL_POINTER = 1,
  /**
   * Bad input: wrong shape, non-finite values, malformed files.
   */
  TK_STATUS_INVALID = 2,
  TK_STATUS_IO = 3,
  /**
   * A computation failed on valid input.
   */
  TK_STATUS_RUNTIME = 4,
  TK_STATUS_PANIC = 5,
} TkStatus;

/**
 * Trained autoencoder backbone.
 */
typedef struct TkBackbone TkBackbone;

/**
 * Trained segment classifier.
 */
typedef struct TkClassifier TkClassifier;

/**
 * Two-component Gaussian mixture over anomaly scores.
 */
typedef struct TkGmm TkGmm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tk_version(void);

/**
 * Message of the last failed call on this thread, or null if the last
 * call succeeded. Valid until the next trajkit call on the same thread.
 */
const char *tk_last_error_message(void);

/**
 * Loads a backbone checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 * The handle must be released with [`tk_backbone_free`].
 */
enum TkStatus tk_backbone_load(const char *path, struct TkBackbone **out);

/**
 * # Safety
 * `b` must be null or a handle from [`tk_backbone_load`], not yet freed.
 */
void tk_backbone_free(struct TkBackbone *b);

/**
 * Hidden size of the backbone, 0 for a null handle.
 *
 * # Safety
 * `b` must be null or a live backbone handle.
 */
size_t tk_backbone_hidden(const struct TkBackbone *b);

/**
 * Segment length the backbone was built for, 0 for a null handle.
 *
 * # Safety
 * `b` must be null or a live backbone handle.
 */
size_t tk_backbone_window(const struct TkBackbone *b);

/**
 * Anomaly score of one trajectory: mean reconstruction loss over its
 * segments taken every `stride` frames. Frames are numbered from 0.
 *
 * # Safety
 * `coords` must hold `frames * 34` values; `out_score` must be writable.
 */
enum TkStatus tk_backbone_score(const struct TkBackbone *b,
                                const double *coords,
                                size_t frames,
                                size_t stride,
                                double *out_score);

/**
 * Fits the two-component mixture to `n` scores.
 *
 * # Safety
 * `scores` must hold `n` values; `out` must be writable. Release the
 * handle with [`tk_gmm_free`].
 */
enum TkStatus tk_gmm_fit(const double *scores,
                         size_t n,
                         size_t max_iter,
                         double tol,
                         uint64_t seed,
                         struct TkGmm **out);

/**
 * # Safety
 * `g` must be null or a handle from [`tk_gmm_fit`], not yet freed.
 */
void tk_gmm_free(struct TkGmm *g);

/**
 * Copies weights, means and variances (two values each). Any output
 * pointer may be null to skip it.
 *
 * # Safety
 * Non-null outputs must have room for two values.
 */
enum TkStatus tk_gmm_params(const struct TkGmm *g,
                            double *weights,
                            double *means,
                            double *variances);

/**
 * Writes 1 for scores assigned to the abnormal component, 0 otherwise.
 *
 * # Safety
 * `scores` and `out_abnormal` must each hold `n` elements.
 */
enum TkStatus tk_gmm_assign(const struct TkGmm *g,
                            const double *scores,
                            size_t n,
                            uint8_t *out_abnormal);

/**
 * Silhouette of a two-way split of one-dimensional scores. `abnormal[i]`
 * is nonzero for points in the abnormal cluster.
 *
 * # Safety
 * `scores` and `abnormal` must each hold `n` elements.
 */
enum TkStatus tk_silhouette(const double *scores, const uint8_t *abnormal, size_t n, double *out);

/**
 * Late fusion of two probability vectors of length `n`.
 *
 * # Safety
 * `a`, `b` and `out` must each hold `n` values.
 */
enum TkStatus tk_fuse_late(const double *a, const double *b, size_t n, double *out);

/**
 * Loads a classifier checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 * Release the handle with [`tk_classifier_free`].
 */
enum TkStatus tk_classifier_load(const char *path, struct TkClassifier **out);

/**
 * # Safety
 * `c` must be null or a handle from [`tk_classifier_load`], not yet freed.
 */
void tk_classifier_free(struct TkClassifier *c);

/**
 * Number of classes, 0 for a null handle.
 *
 * # Safety
 * `c` must be null or a live classifier handle.
 */
size_t tk_classifier_classes(const struct TkClassifier *c);

/**
 * Class probabilities of one segment of `window * 34` coordinates. The
 * backbone must be the one the classifier was trained on.
 *
 * # Safety
 * `coords` must hold `tk_backbone_window(b) * 34` values and `out_probs`
 * `out_len` values.
 */
enum TkStatus tk_classifier_predict(const struct TkClassifier *c,
                                    const struct TkBackbone *b,
                                    const double *coords,
                                    double *out_probs,
                                    size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAJKIT_H */

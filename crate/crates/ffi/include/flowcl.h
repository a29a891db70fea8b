#ifndef FLOWCL_H
#define FLOWCL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values 2 to 9 match the command-line exit codes.
 */
typedef enum FlowclStatus {
  FLOWCL_STATUS_OK = 0,
  FLOWCL_STATUS_NULL_POINTER = 1,
  FLOWCL_STATUS_INVALID_ARGUMENT = 2,
  FLOWCL_STATUS_IO = 3,
  FLOWCL_STATUS_SCHEMA = 4,
  FLOWCL_STATUS_PARSE = 5,
  FLOWCL_STATUS_INSUFFICIENT_DATA = 6,
  FLOWCL_STATUS_NO_SHARED_FEATURES = 7,
  FLOWCL_STATUS_NUMERIC = 8,
  FLOWCL_STATUS_SHAPE = 9,
  FLOWCL_STATUS_BUFFER_TOO_SMALL = 10,
  FLOWCL_STATUS_PANIC = 11,
} FlowclStatus;

/**
 * A trained encoder with its projection head.
 */
typedef struct FlowclEncoder FlowclEncoder;

/**
 * A fitted preprocessor together with the schema it was fitted for.
 */
typedef struct FlowclPreprocessor FlowclPreprocessor;

/**
 * Weighted-average classification metrics.
 */
typedef struct FlowclMetrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
} FlowclMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. Valid until
 * the next call into this library from the same thread.
 */
const char *flowcl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *flowcl_version(void);

/**
 * Trainable parameter count (encoder plus projection head) of a named preset.
 *
 * # Safety
 * `preset` must be a NUL-terminated string; `out` must be writable.
 */
enum FlowclStatus flowcl_preset_parameter_count(const char *preset, uint64_t *out);

/**
 * Contrastive loss of `rows` latent vectors (row-major, `rows × cols`), where
 * rows `2k` and `2k + 1` are the two views of one sample.
 *
 * # Safety
 * `z` must point to `rows * cols` doubles; `out` must be writable.
 */
enum FlowclStatus flowcl_batch_loss(const double *z,
                                    size_t rows,
                                    size_t cols,
                                    double temperature,
                                    double *out);

/**
 * Weighted metrics of `n` predictions against labels in `0..classes`.
 *
 * # Safety
 * `predictions` and `labels` must point to `n` values; `out` must be writable.
 */
enum FlowclStatus flowcl_metrics(const size_t *predictions,
                                 const size_t *labels,
                                 size_t n,
                                 size_t classes,
                                 struct FlowclMetrics *out);

/**
 * One masked view of `x`: `round(ratio * width)` positions set to zero.
 * The positions depend only on `seed` and `draw`.
 *
 * # Safety
 * `x` and `out` must each point to `width` doubles.
 */
enum FlowclStatus flowcl_mask_view(const double *x,
                                   size_t width,
                                   double ratio,
                                   uint64_t seed,
                                   uint64_t draw,
                                   double *out);

/**
 * Load an encoder checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable. The
 * handle written to `out` must be released with `flowcl_encoder_free`.
 */
enum FlowclStatus flowcl_encoder_load(const char *path, struct FlowclEncoder **out);

/**
 * Release an encoder handle. Null is ignored.
 *
 * # Safety
 * `encoder` must come from `flowcl_encoder_load` and not be used afterwards.
 */
void flowcl_encoder_free(struct FlowclEncoder *encoder);

/**
 * Input width, hidden width and context width of a loaded encoder.
 *
 * # Safety
 * `encoder` must be a live handle; each non-null output must be writable.
 */
enum FlowclStatus flowcl_encoder_dims(const struct FlowclEncoder *encoder,
                                      size_t *input_width,
                                      size_t *hidden_dim,
                                      size_t *context_dim);

/**
 * Hidden representations of `rows` inputs (row-major `rows × input_width`)
 * into `out` (`rows × hidden_dim`). Eval mode; the handle is not modified.
 *
 * # Safety
 * `x` must point to `rows * width` doubles and `out` to `out_len` doubles.
 */
enum FlowclStatus flowcl_encoder_encode(const struct FlowclEncoder *encoder,
                                        const double *x,
                                        size_t rows,
                                        size_t width,
                                        double *out,
                                        size_t out_len);

/**
 * Context vectors for `rows` hidden representations (`rows × hidden_dim`)
 * into `out` (`rows × context_dim`).
 *
 * # Safety
 * `h` must point to `rows * hidden_dim` doubles and `out` to `out_len` doubles.
 */
enum FlowclStatus flowcl_encoder_project(const struct FlowclEncoder *encoder,
                                         const double *h,
                                         size_t rows,
                                         double *out,
                                         size_t out_len);

/**
 * Load a fitted preprocessor. `schema` is a schema file or `builtin:<name>`;
 * it must be the schema the state was fitted for.
 *
 * # Safety
 * `schema` and `state_path` must be NUL-terminated strings; `out` must be
 * writable. Release the handle with `flowcl_preprocessor_free`.
 */
enum FlowclStatus flowcl_preprocessor_load(const char *schema,
                                           const char *state_path,
                                           struct FlowclPreprocessor **out);

/**
 * Release a preprocessor handle. Null is ignored.
 *
 * # Safety
 * `pre` must come from `flowcl_preprocessor_load` and not be used afterwards.
 */
void flowcl_preprocessor_free(struct FlowclPreprocessor *pre);

/**
 * Encoded width produced by the preprocessor.
 *
 * # Safety
 * `pre` must be a live handle; `out` must be writable.
 */
enum FlowclStatus flowcl_preprocessor_width(const struct FlowclPreprocessor *pre, size_t *out);

/**
 * Encode CSV text laid out as the schema expects (header row unless the
 * schema fixes the columns). Writes `rows × width` values to `out` and the
 * row count to `rows`. Labels are ignored.
 *
 * # Safety
 * `csv` must be a NUL-terminated string, `out` must point to `out_len`
 * doubles, and `rows` must be writable.
 */
enum FlowclStatus flowcl_preprocessor_transform_csv(const struct FlowclPreprocessor *pre,
                                                    const char *csv,
                                                    double *out,
                                                    size_t out_len,
                                                    size_t *rows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWCL_H */

#ifndef PIOSTACK_H
#define PIOSTACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Heading outcome from [`piostack_heading_map_lookup`]: a P/I/O bit mask
// (P = 1, I = 2, O = 4) for labeled headings, otherwise one of these.
#define PIOSTACK_HEADING_NEGATIVE 0

#define PIOSTACK_HEADING_DISCARD -1

typedef enum PiostackStatus {
  PIOSTACK_STATUS_OK = 0,
  PIOSTACK_STATUS_NULL_POINTER = 1,
  PIOSTACK_STATUS_INVALID_UTF8 = 2,
  PIOSTACK_STATUS_INVALID_ARGUMENT = 3,
  PIOSTACK_STATUS_IO = 4,
  PIOSTACK_STATUS_PARSE = 5,
  PIOSTACK_STATUS_SCHEMA = 6,
  PIOSTACK_STATUS_SHAPE = 7,
  PIOSTACK_STATUS_SINGLE_CLASS = 8,
  PIOSTACK_STATUS_PANIC = 9,
} PiostackStatus;

typedef struct PiostackHeadingMap PiostackHeadingMap;

typedef struct PiostackQiefDetectors PiostackQiefDetectors;

typedef struct PiostackStackedModel PiostackStackedModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *piostack_last_error(void);

// Library version as a static string.
const char *piostack_version(void);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void piostack_string_free(char *s);

// Numerically stable logistic function.
double piostack_sigmoid(double s);

// Summed binary cross-entropy over the three labels from logits.
//
// # Safety
// `logits` and `targets` point to 3 doubles; `out` to one.
enum PiostackStatus piostack_bce_with_logits(const double *logits,
                                             const double *targets,
                                             double *out);

// ROC AUC of `scores` against 0/1 `labels`, ties counted as one half.
//
// # Safety
// `scores` and `labels` point to `n` elements; `out` to one double.
enum PiostackStatus piostack_roc_auc(const double *scores,
                                     const uint8_t *labels,
                                     size_t n,
                                     double *out);

// Normalized (lowercased, letters only, lemmatized) form of a heading.
//
// # Safety
// `raw` is a NUL-terminated string; `out` receives a string to release
// with [`piostack_string_free`].
enum PiostackStatus piostack_normalize_heading(const char *raw, char **out);

// The built-in heading map.
//
// # Safety
// `out` receives a handle to release with [`piostack_heading_map_free`].
enum PiostackStatus piostack_heading_map_default(struct PiostackHeadingMap **out);

// Parse a heading map from `heading<TAB>decision` lines.
//
// # Safety
// `text` is a NUL-terminated string; `out` receives a handle.
enum PiostackStatus piostack_heading_map_parse(const char *text, struct PiostackHeadingMap **out);

// Normalize `raw_heading` and look it up. `out` receives a label mask,
// `PIOSTACK_HEADING_NEGATIVE` or `PIOSTACK_HEADING_DISCARD`.
//
// # Safety
// `map` is a live handle; `raw_heading` a NUL-terminated string.
enum PiostackStatus piostack_heading_map_lookup(const struct PiostackHeadingMap *map,
                                                const char *raw_heading,
                                                int32_t *out);

// # Safety
// `map` is null or a handle not yet freed.
void piostack_heading_map_free(struct PiostackHeadingMap *map);

// The built-in QIEF detectors.
//
// # Safety
// `out` receives a handle to release with [`piostack_qief_free`].
enum PiostackStatus piostack_qief_default(struct PiostackQiefDetectors **out);

// Compile detectors from `name<TAB>regex` lines.
//
// # Safety
// `text` is a NUL-terminated string; `out` receives a handle.
enum PiostackStatus piostack_qief_parse(const char *text, struct PiostackQiefDetectors **out);

// Match counts in `pct, pop, dose, num` order.
//
// # Safety
// `detectors` is a live handle; `text` NUL-terminated; `counts` points to
// 4 writable `uint32_t`.
enum PiostackStatus piostack_qief_count(const struct PiostackQiefDetectors *detectors,
                                        const char *text,
                                        uint32_t *counts);

// # Safety
// `detectors` is null or a handle not yet freed.
void piostack_qief_free(struct PiostackQiefDetectors *detectors);

// Load a stacked model saved by the `stack` command.
//
// # Safety
// `path` is a NUL-terminated UTF-8 path; `out` receives a handle to
// release with [`piostack_model_free`].
enum PiostackStatus piostack_model_load(const char *path, struct PiostackStackedModel **out);

// Number of feature columns the model expects.
//
// # Safety
// `model` is a live handle.
enum PiostackStatus piostack_model_n_features(const struct PiostackStackedModel *model,
                                              size_t *out);

// P, I, O probabilities for one stack-matrix row.
//
// # Safety
// `model` is a live handle; `x` points to `n` doubles; `probs` to 3.
enum PiostackStatus piostack_model_predict(const struct PiostackStackedModel *model,
                                           const double *x,
                                           size_t n,
                                           double *probs);

// # Safety
// `model` is null or a handle not yet freed.
void piostack_model_free(struct PiostackStackedModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIOSTACK_H */

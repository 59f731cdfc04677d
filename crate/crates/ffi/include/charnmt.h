#ifndef CHARNMT_H
#define CHARNMT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum CnmtStatus {
  CNMT_STATUS_OK = 0,
  CNMT_STATUS_NULL_POINTER = 1,
  CNMT_STATUS_INVALID_UTF8 = 2,
  CNMT_STATUS_CONFIG = 3,
  CNMT_STATUS_DATA = 4,
  CNMT_STATUS_CHECKPOINT = 5,
  CNMT_STATUS_IO = 6,
  CNMT_STATUS_NUMERIC = 7,
  CNMT_STATUS_CONTRACT = 8,
  CNMT_STATUS_PANIC = 9,
} CnmtStatus;

/**
 * Opaque model handle.
 */
typedef struct CnmtModel CnmtModel;

/**
 * Corpus-level scores as printed by `charnmt eval`.
 */
typedef struct CnmtEvalReport {
  double bleu;
  double bleu_cased;
  double ter;
  double char_ter;
  size_t segments;
} CnmtEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a
 * success. Valid until the next call into the library on this thread.
 */
const char *cnmt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cnmt_version(void);

/**
 * Loads a checkpoint file. On success `*out` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CnmtStatus cnmt_model_load(const char *path, struct CnmtModel **out);

/**
 * Releases a handle from [`cnmt_model_load`]. Null is ignored.
 *
 * # Safety
 * `model` must come from [`cnmt_model_load`] and not be used afterwards.
 */
void cnmt_model_free(struct CnmtModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum CnmtStatus cnmt_model_hidden_size(const struct CnmtModel *model, size_t *out);

/**
 * Greedy-decodes one line. On success `*out` is a new string to be
 * released with [`cnmt_string_free`].
 *
 * # Safety
 * `model` must be a live handle, `text` NUL-terminated, `out` valid.
 */
enum CnmtStatus cnmt_translate(const struct CnmtModel *model,
                               const char *text,
                               size_t max_len,
                               char **out);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void cnmt_string_free(char *s);

/**
 * Corpus BLEU over `n` whitespace-tokenized segment pairs.
 *
 * # Safety
 * `hyps` and `refs` must each point to `n` NUL-terminated strings.
 */
enum CnmtStatus cnmt_bleu(const char *const *hyps,
                          const char *const *refs,
                          size_t n,
                          bool cased,
                          double *out);

/**
 * Word-level TER of one segment pair (whitespace tokens).
 *
 * # Safety
 * Both strings must be NUL-terminated and `out` valid.
 */
enum CnmtStatus cnmt_ter(const char *hyp, const char *reference, double *out);

/**
 * Character-level TER of one segment pair.
 *
 * # Safety
 * Both strings must be NUL-terminated and `out` valid.
 */
enum CnmtStatus cnmt_char_ter(const char *hyp, const char *reference, double *out);

/**
 * All corpus metrics for `n` aligned segments.
 *
 * # Safety
 * `hyps` and `refs` must each point to `n` NUL-terminated strings.
 */
enum CnmtStatus cnmt_evaluate(const char *const *hyps,
                              const char *const *refs,
                              size_t n,
                              struct CnmtEvalReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHARNMT_H */

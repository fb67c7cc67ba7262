#ifndef LRPTEXT_H
#define LRPTEXT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum LrpStatus {
  LRP_STATUS_OK = 0,
  LRP_STATUS_NULL_POINTER = 1,
  LRP_STATUS_INVALID_UTF8 = 2,
  LRP_STATUS_IO = 3,
  LRP_STATUS_FORMAT = 4,
  LRP_STATUS_DIM_MISMATCH = 5,
  LRP_STATUS_INVALID_ARGUMENT = 6,
  LRP_STATUS_NOT_FOUND = 7,
  LRP_STATUS_DEGENERATE = 8,
  LRP_STATUS_BUFFER_TOO_SMALL = 9,
  LRP_STATUS_PANIC = 10,
} LrpStatus;

typedef enum LrpMethod {
  LRP_METHOD_LRP = 0,
  LRP_METHOD_SA = 1,
  LRP_METHOD_SA_L2 = 2,
} LrpMethod;

// A trained classifier together with its label names.
typedef struct LrpModel LrpModel;

// A word-embedding lookup table.
typedef struct LrpTable LrpTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf`.
//
// Returns the buffer size needed, including the NUL. Nothing is written
// when `buf` is null or too small.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
uintptr_t lrp_last_error_message(char *buf, uintptr_t len);

// Loads a model file written by `lrptext train`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LrpStatus lrp_model_load(const char *path, struct LrpModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`lrp_model_load`] and not be used afterwards.
void lrp_model_free(struct LrpModel *model);

// Reports the embedding dimension, filter count and class count.
//
// # Safety
// `model` must be a live handle; the out pointers may be null.
enum LrpStatus lrp_model_dims(const struct LrpModel *model,
                              uintptr_t *embedding_dim,
                              uintptr_t *filters,
                              uintptr_t *classes);

// Copies the name of class `index` into `buf` (NUL-terminated).
//
// # Safety
// `model` must be a live handle, `buf` null or valid for `len` bytes,
// `required` null or valid.
enum LrpStatus lrp_model_label(const struct LrpModel *model,
                               uintptr_t index,
                               char *buf,
                               uintptr_t len,
                               uintptr_t *required);

// Classifies one document.
//
// `x` holds `n_words` word vectors of the model's embedding dimension.
// `scores` may be null; otherwise it must have room for `scores_len`
// values and receives the class scores.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum LrpStatus lrp_model_predict(const struct LrpModel *model,
                                 const double *x,
                                 uintptr_t n_words,
                                 uintptr_t *predicted,
                                 double *scores,
                                 uintptr_t scores_len);

// Computes word relevances of `target` for one document.
//
// `word_relevance` receives `n_words` values. `dim_relevance` may be null;
// otherwise it receives the full map in the same column-major layout as
// `x`. `f_value` (nullable) receives the target score. `epsilon` is used
// by LRP only.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum LrpStatus lrp_explain(const struct LrpModel *model,
                           const double *x,
                           uintptr_t n_words,
                           uintptr_t target,
                           enum LrpMethod method,
                           double epsilon,
                           double *word_relevance,
                           double *dim_relevance,
                           double *f_value);

// Loads a word2vec text-format embedding table.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LrpStatus lrp_table_load(const char *path, struct LrpTable **out);

// Releases a table. Null is ignored.
//
// # Safety
// `table` must come from [`lrp_table_load`] and not be used afterwards.
void lrp_table_free(struct LrpTable *table);

// Vector dimension of the table, 0 for a null handle.
//
// # Safety
// `table` must be null or a live handle.
uintptr_t lrp_table_dim(const struct LrpTable *table);

// Copies the vector for `token` into `out` (`len` must be at least the
// table dimension). Returns `NOT_FOUND` for out-of-vocabulary tokens.
//
// # Safety
// `table` must be a live handle, `token` NUL-terminated, `out` valid for
// `len` values.
enum LrpStatus lrp_table_lookup(const struct LrpTable *table,
                                const char *token,
                                double *out,
                                uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LRPTEXT_H */

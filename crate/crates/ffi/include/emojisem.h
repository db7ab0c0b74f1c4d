#ifndef EMOJISEM_H
#define EMOJISEM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum EsStatus {
  ES_STATUS_OK = 0,
  ES_STATUS_NULL_POINTER = 1,
  ES_STATUS_INVALID_UTF8 = 2,
  ES_STATUS_IO = 3,
  ES_STATUS_PARSE = 4,
  ES_STATUS_NOT_FOUND = 5,
  ES_STATUS_INVALID_ARGUMENT = 6,
  ES_STATUS_UNDEFINED = 7,
  ES_STATUS_PANIC = 8,
} EsStatus;

// An emoji inventory.
typedef struct EsInventory EsInventory;

// A loaded embedding model.
typedef struct EsModel EsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *es_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library from this thread.
const char *es_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void es_string_free(char *s);

// Loads a model file written by the trainer.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum EsStatus es_model_load(const char *path, struct EsModel **out);

// # Safety
// `model` must come from [`es_model_load`] and not have been freed.
void es_model_free(struct EsModel *model);

// Vector dimension, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t es_model_dim(const struct EsModel *model);

// Vocabulary size, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t es_model_len(const struct EsModel *model);

// Token at `index`, or null when out of range. Owned by the handle.
//
// # Safety
// `model` must be null or a live handle.
const char *es_model_token(const struct EsModel *model, size_t index);

// Copies the vector of `token` into `out`, which holds `len` floats; `len`
// must equal the model dimension.
//
// # Safety
// `out` must point to `len` writable floats.
enum EsStatus es_model_vector(const struct EsModel *model,
                              const char *token,
                              float *out,
                              size_t len);

// The `k` nearest tokens of `token` by cosine. Writes up to `k` token
// indices (see [`es_model_token`]) and scores; `count` receives how many.
//
// # Safety
// `indices` and `scores` must each hold `k` writable elements.
enum EsStatus es_model_neighbors(const struct EsModel *model,
                                 const char *token,
                                 size_t k,
                                 size_t *indices,
                                 double *scores,
                                 size_t *count);

// The bundled Emoji 1.0 inventory. Never null.
struct EsInventory *es_inventory_builtin(void);

// Loads an inventory from an emoji-data file and a category map.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum EsStatus es_inventory_load(const char *emoji_data,
                                const char *category_map,
                                struct EsInventory **out);

// # Safety
// `inventory` must be null or a live handle.
void es_inventory_free(struct EsInventory *inventory);

// Number of entries, or 0 for a null handle.
//
// # Safety
// `inventory` must be null or a live handle.
size_t es_inventory_len(const struct EsInventory *inventory);

// Writes whether `emoji` (canonical form) is an inventory entry.
//
// # Safety
// `emoji` must be a NUL-terminated string; `out` must be writable.
enum EsStatus es_inventory_contains(const struct EsInventory *inventory,
                                    const char *emoji,
                                    bool *out);

// Display category of `emoji` as an owned string, or null in `out` when
// the emoji is not in the inventory.
//
// # Safety
// `emoji` must be a NUL-terminated string; `out` must be writable.
enum EsStatus es_inventory_category(const struct EsInventory *inventory,
                                    const char *emoji,
                                    char **out);

// Replaces URLs, mentions, dates and similar spans with meta-tokens.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum EsStatus es_normalize_text(const char *text, char **out);

// Tokenizes one post; `out` receives the tokens joined by single spaces.
//
// # Safety
// `text` and `lang` must be NUL-terminated strings; `out` must be writable.
enum EsStatus es_tokenize(const struct EsInventory *inventory,
                          const char *text,
                          const char *lang,
                          bool pre_tokenized,
                          char **out);

// Pearson correlation of two length-`n` series.
//
// # Safety
// `x` and `y` must hold `n` doubles; `out` must be writable.
enum EsStatus es_pearson(const double *x, const double *y, size_t n, double *out);

// Spearman rank correlation with average ranks for ties.
//
// # Safety
// `x` and `y` must hold `n` doubles; `out` must be writable.
enum EsStatus es_spearman(const double *x, const double *y, size_t n, double *out);

// Cosine similarity of two length-`n` vectors.
//
// # Safety
// `u` and `v` must hold `n` doubles; `out` must be writable.
enum EsStatus es_cosine(const double *u, const double *v, size_t n, double *out);

// Orthonormalizes `k` row vectors of dimension `d` (row-major, `k * d`
// doubles) in order, writing the basis to `out` in the same layout.
//
// # Safety
// `vectors` and `out` must each hold `k * d` doubles.
enum EsStatus es_gram_schmidt(const double *vectors, size_t k, size_t d, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMOJISEM_H */

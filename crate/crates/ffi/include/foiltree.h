/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef FOILTREE_H
#define FOILTREE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum FtStatus {
  FT_STATUS_OK = 0,
  FT_STATUS_NULL_POINTER = 1,
  FT_STATUS_INVALID_UTF8 = 2,
  FT_STATUS_IO = 3,
  FT_STATUS_MALFORMED_CSV = 4,
  FT_STATUS_UNKNOWN_SCHEMA = 5,
  FT_STATUS_EMPTY_DATASET = 6,
  FT_STATUS_DEGENERATE_SPLIT = 7,
  FT_STATUS_UNKNOWN_MODEL_KIND = 8,
  FT_STATUS_INVALID_HYPERPARAMETER = 9,
  FT_STATUS_LENGTH_MISMATCH = 10,
  FT_STATUS_ARITY_MISMATCH = 11,
  FT_STATUS_FOIL_EQUALS_FACT = 12,
  FT_STATUS_CLASS_OUT_OF_RANGE = 13,
  FT_STATUS_INSUFFICIENT_DATA = 14,
  FT_STATUS_LEAF_NOT_IN_TREE = 15,
  FT_STATUS_INCONSISTENT_CONDITIONS = 16,
  FT_STATUS_INDEX_OUT_OF_RANGE = 17,
  FT_STATUS_INVALID_ARGUMENT = 18,
  FT_STATUS_MODEL_FORMAT = 19,
  FT_STATUS_PANIC = 99,
} FtStatus;

/*
 A loaded dataset.
 */
typedef struct FtDataset FtDataset;

/*
 A contrastive explanation.
 */
typedef struct FtExplanation FtExplanation;

/*
 A trained classifier.
 */
typedef struct FtModel FtModel;

/*
 One merged condition. `has_lower`/`has_upper` are 0 or 1; the bound
 fields are meaningful only when the flag is set. The condition reads
 `lower < x[feature] <= upper`.
 */
typedef struct FtLiteral {
  size_t feature;
  int has_lower;
  double lower;
  int has_upper;
  double upper;
} FtLiteral;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failed call on this thread, or "" after a
 successful call. The pointer stays valid until the next `ft_*` call on
 the same thread; do not free it.
 */
const char *ft_last_error(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void ft_string_free(char *s);

/*
 Loads a CSV file. `schema` is "iris", "diabetes", "heart" or "generic"
 (header row, last column is the label).

 # Safety
 `path` and `schema` must be NUL-terminated strings; `out` must be writable.
 */
enum FtStatus ft_dataset_load(const char *path, const char *schema, struct FtDataset **out);

/*
 Stratified train/test split.

 # Safety
 `dataset` must be a live handle; `train` and `test` must be writable.
 */
enum FtStatus ft_dataset_split(const struct FtDataset *dataset,
                               double test_fraction,
                               uint64_t seed,
                               struct FtDataset **train,
                               struct FtDataset **test);

/*
 # Safety
 `dataset` must be a live handle or null.
 */
size_t ft_dataset_n_instances(const struct FtDataset *dataset);

/*
 # Safety
 `dataset` must be a live handle or null.
 */
size_t ft_dataset_n_features(const struct FtDataset *dataset);

/*
 # Safety
 `dataset` must be a live handle or null.
 */
size_t ft_dataset_n_classes(const struct FtDataset *dataset);

/*
 Copies row `index` into `out`, which must hold `len == n_features` values;
 `label` (nullable) receives the class index.

 # Safety
 `dataset` must be a live handle; `out` must hold `len` doubles.
 */
enum FtStatus ft_dataset_row(const struct FtDataset *dataset,
                             size_t index,
                             double *out,
                             size_t len,
                             size_t *label);

/*
 Name of class `index` as a newly allocated string.

 # Safety
 `dataset` must be a live handle; `out` must be writable.
 */
enum FtStatus ft_dataset_class_name(const struct FtDataset *dataset, size_t index, char **out);

/*
 # Safety
 `dataset` must come from this library and not have been freed. Null is ignored.
 */
void ft_dataset_free(struct FtDataset *dataset);

/*
 Trains a model. `kind` is "logistic-regression", "random-forest", "mlp"
 or "svm"; default hyperparameters are used.

 # Safety
 `train` must be a live handle; `kind` a NUL-terminated string; `out` writable.
 */
enum FtStatus ft_model_fit(const struct FtDataset *train,
                           const char *kind,
                           uint64_t seed,
                           struct FtModel **out);

/*
 Predicted class of `x` (length `len`).

 # Safety
 `model` must be a live handle; `x` must hold `len` doubles; `out` writable.
 */
enum FtStatus ft_model_predict(const struct FtModel *model,
                               const double *x,
                               size_t len,
                               size_t *out);

/*
 Serializes the model to JSON.

 # Safety
 `model` must be a live handle; `out` writable.
 */
enum FtStatus ft_model_to_json(const struct FtModel *model, char **out);

/*
 Restores a model from [`ft_model_to_json`] output.

 # Safety
 `json` must be a NUL-terminated string; `out` writable.
 */
enum FtStatus ft_model_from_json(const char *json, struct FtModel **out);

/*
 # Safety
 `model` must come from this library and not have been freed. Null is ignored.
 */
void ft_model_free(struct FtModel *model);

/*
 Explains why `model` assigns `x` its class rather than `foil`.
 A negative `foil` selects the second most likely class. `config_json`
 may be null for defaults, or a JSON explainer configuration.

 # Safety
 `model` and `train` must be live handles; `x` must hold `len` doubles;
 `config_json` null or NUL-terminated; `out` writable.
 */
enum FtStatus ft_explain(const struct FtModel *model,
                         const struct FtDataset *train,
                         const double *x,
                         size_t len,
                         int64_t foil,
                         uint64_t seed,
                         const char *config_json,
                         struct FtExplanation **out);

/*
 # Safety
 `e` must be a live handle or null.
 */
size_t ft_explanation_fact(const struct FtExplanation *e);

/*
 # Safety
 `e` must be a live handle or null.
 */
size_t ft_explanation_foil(const struct FtExplanation *e);

/*
 Number of literals.

 # Safety
 `e` must be a live handle or null.
 */
size_t ft_explanation_len(const struct FtExplanation *e);

/*
 1 if the instance already sits in a foil-labelled leaf, else 0.

 # Safety
 `e` must be a live handle or null.
 */
int ft_explanation_zero_length(const struct FtExplanation *e);

/*
 Copies literal `index` into `out`.

 # Safety
 `e` must be a live handle; `out` writable.
 */
enum FtStatus ft_explanation_literal(const struct FtExplanation *e,
                                     size_t index,
                                     struct FtLiteral *out);

/*
 Serializes the explanation to JSON.

 # Safety
 `e` must be a live handle; `out` writable.
 */
enum FtStatus ft_explanation_to_json(const struct FtExplanation *e, char **out);

/*
 Renders the dialogue, one line per `\n`. Class and feature names come
 from `dataset`. `quantitative` non-zero adds the thresholds.

 # Safety
 `e` and `dataset` must be live handles; `out` writable.
 */
enum FtStatus ft_explanation_render(const struct FtExplanation *e,
                                    const struct FtDataset *dataset,
                                    int quantitative,
                                    char **out);

/*
 # Safety
 `e` must come from this library and not have been freed. Null is ignored.
 */
void ft_explanation_free(struct FtExplanation *e);

/*
 Stable machine-readable name of a status, e.g. "FOIL_EQUALS_FACT".
 The returned string is static.
 */
const char *ft_status_name(enum FtStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOILTREE_H */

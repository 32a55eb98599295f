#ifndef FLOWFORENSICS_H
#define FLOWFORENSICS_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible entry point.
 */
typedef enum FfStatus {
  /**
   * Success.
   */
  FF_STATUS_OK = 0,
  /**
   * A configuration or usage error (bad arguments, bad JSON spec).
   */
  FF_STATUS_ERR_CONFIG = 1,
  /**
   * A data error (I/O, schema, parse, label problems).
   */
  FF_STATUS_ERR_DATA = 2,
  /**
   * A null pointer was passed where a value is required.
   */
  FF_STATUS_ERR_NULL_POINTER = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  FF_STATUS_ERR_UTF8 = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  FF_STATUS_ERR_INTERNAL = 5,
} FfStatus;

/**
 * Opaque dataset handle.
 */
typedef struct FfDataset FfDataset;

/**
 * Opaque trained-model handle (classifier plus its fitted preprocessing).
 */
typedef struct FfModel FfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread. The pointer stays
 * valid until the next failing call on the same thread; do not free it.
 */
const char *ff_last_error(void);

/**
 * Parses a flow CSV under a schema descriptor file into a dataset handle.
 *
 * # Safety
 * `schema_path` and `csv_path` must be valid NUL-terminated strings;
 * `out_dataset` must be a valid pointer.
 */
enum FfStatus ff_dataset_load(const char *schema_path,
                              const char *csv_path,
                              struct FfDataset **out_dataset);

/**
 * Generates the deterministic synthetic benchmark dataset.
 *
 * # Safety
 * `out_dataset` must be a valid pointer.
 */
enum FfStatus ff_dataset_synth(uintptr_t n_records,
                               double attack_fraction,
                               double separation,
                               uint64_t seed,
                               struct FfDataset **out_dataset);

/**
 * Number of records; 0 for a null handle.
 *
 * # Safety
 * `dataset` must be a handle from this library or null.
 */
uintptr_t ff_dataset_len(const struct FfDataset *dataset);

/**
 * Releases a dataset handle. Null is a no-op.
 *
 * # Safety
 * `dataset` must be a handle from this library (or null) and not used again.
 */
void ff_dataset_free(struct FfDataset *dataset);

/**
 * Ranks features by information gain; writes `rank,feature,ig` lines.
 *
 * # Safety
 * `dataset` must be a live handle; `out_text` must be a valid pointer.
 */
enum FfStatus ff_rank(const struct FfDataset *dataset, char **out_text);

/**
 * Trains a classifier described by a JSON spec, e.g.
 * `{"classifier":"dt"}` or
 * `{"classifier":"arm","min_support":0.05,"min_confidence":0.9,"max_antecedent":3}`.
 * Valid tags: arm, dt, nb, ann.
 *
 * # Safety
 * `dataset` must be a live handle; `spec_json` a valid NUL-terminated
 * string; `out_model` a valid pointer.
 */
enum FfStatus ff_train(const struct FfDataset *dataset,
                       const char *spec_json,
                       struct FfModel **out_model);

/**
 * Serializes a model (classifier plus fitted preprocessing) to JSON.
 *
 * # Safety
 * `model` must be a live handle; `out_text` a valid pointer.
 */
enum FfStatus ff_model_to_json(const struct FfModel *model, char **out_text);

/**
 * Restores a model previously produced by [`ff_model_to_json`].
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out_model` a valid pointer.
 */
enum FfStatus ff_model_from_json(const char *json, struct FfModel **out_model);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be a handle from this library (or null) and not used again.
 */
void ff_model_free(struct FfModel *model);

/**
 * Predicts every record, writing one 0/1 label per record into
 * `out_labels` (capacity `out_len`, which must be at least the dataset
 * length).
 *
 * # Safety
 * `model` and `dataset` must be live handles; `out_labels` must point to
 * at least `out_len` writable bytes.
 */
enum FfStatus ff_predict(const struct FfModel *model,
                         const struct FfDataset *dataset,
                         uint8_t *out_labels,
                         uintptr_t out_len);

/**
 * Runs stratified k-fold cross-validation with a JSON classifier spec and
 * returns the textual report.
 *
 * # Safety
 * `dataset` must be a live handle; `spec_json` a valid NUL-terminated
 * string; `out_text` a valid pointer.
 */
enum FfStatus ff_cross_validate(const struct FfDataset *dataset,
                                const char *spec_json,
                                uintptr_t folds,
                                uint64_t seed,
                                char **out_text);

/**
 * Predicts the dataset with the model and returns the delimited forensic
 * report (header `srcip,sport,dstip,dsport,proto,label,rule_id`). Every
 * record must carry flow identifiers.
 *
 * # Safety
 * `model` and `dataset` must be live handles; `out_text` a valid pointer.
 */
enum FfStatus ff_attribute(const struct FfModel *model,
                           const struct FfDataset *dataset,
                           uint64_t seed,
                           char **out_text);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must have been returned by this library and not freed before.
 */
void ff_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWFORENSICS_H */

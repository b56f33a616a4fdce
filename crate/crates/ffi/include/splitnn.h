#ifndef SPLITNN_H
#define SPLITNN_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SnStatus {
  SN_STATUS_OK = 0,
  SN_STATUS_NULL_POINTER = 1,
  SN_STATUS_INVALID_ARGUMENT = 2,
  SN_STATUS_IO = 3,
  SN_STATUS_SCHEMA = 4,
  SN_STATUS_MALFORMED_DATA = 5,
  SN_STATUS_SHAPE = 6,
  SN_STATUS_DIVERGENCE = 7,
  SN_STATUS_CHECKPOINT = 8,
  SN_STATUS_PANIC = 9,
} SnStatus;

/**
 * A feature clustering.
 */
typedef struct SnClustering SnClustering;

/**
 * A loaded dataset.
 */
typedef struct SnDataset SnDataset;

/**
 * A trained model with its preprocessing.
 */
typedef struct SnModel SnModel;

/**
 * Training settings; obtain defaults from [`sn_train_config_default`].
 */
typedef struct SnTrainConfig {
  double learning_rate;
  size_t batch_size;
  size_t epochs;
  uint64_t seed;
  size_t total_hidden;
  /**
   * One head over the concatenated branches instead of one head per
   * branch with averaged outputs.
   */
  bool shared_head;
} SnTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sn_last_error_message(void);

/**
 * Loads a dataset described by a schema file. `data_path` may be null to
 * use the schema's own data file.
 *
 * # Safety
 * Paths must be null or nul-terminated strings; `out` must be writable.
 */
enum SnStatus sn_dataset_load(const char *schema_path,
                              const char *data_path,
                              struct SnDataset **out);

/**
 * Builds a dataset from a row-major `n_rows × n_features` matrix in which
 * NaN marks a missing cell. `num_classes` of 0 makes a regression dataset;
 * otherwise labels must be class indices.
 *
 * # Safety
 * `values` must hold `n_rows * n_features` doubles and `labels` `n_rows`.
 */
enum SnStatus sn_dataset_from_arrays(const double *values,
                                     const double *labels,
                                     size_t n_rows,
                                     size_t n_features,
                                     size_t num_classes,
                                     struct SnDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle; output pointers must be writable.
 */
enum SnStatus sn_dataset_shape(const struct SnDataset *ds, size_t *n_rows, size_t *n_features);

/**
 * Fraction of feature cells that are missing.
 *
 * # Safety
 * `ds` must be a live dataset handle; `out` must be writable.
 */
enum SnStatus sn_dataset_missing_fraction(const struct SnDataset *ds, double *out);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void sn_dataset_free(struct SnDataset *ds);

/**
 * Clusters the features of every row by correlation distance (`1 - |r|`
 * when `absolute` is set, else `1 - r`) and cuts the dendrogram at
 * `threshold` times its tallest merge.
 *
 * # Safety
 * `ds` must be a live dataset handle; `out` must be writable.
 */
enum SnStatus sn_cluster(const struct SnDataset *ds,
                         double threshold,
                         bool absolute,
                         struct SnClustering **out);

/**
 * # Safety
 * `c` must be a live clustering handle; `k` must be writable.
 */
enum SnStatus sn_clustering_k(const struct SnClustering *c, size_t *k);

/**
 * Copies the cluster index of every feature into `out`, which must hold
 * exactly one entry per feature.
 *
 * # Safety
 * `c` must be a live clustering handle; `out` must hold `len` entries.
 */
enum SnStatus sn_clustering_assignment(const struct SnClustering *c, size_t *out, size_t len);

/**
 * # Safety
 * `c` must be null or a handle not yet freed.
 */
void sn_clustering_free(struct SnClustering *c);

struct SnTrainConfig sn_train_config_default(void);

/**
 * Trains on every row of `ds`. A null `clustering` trains the vanilla
 * single-branch network.
 *
 * # Safety
 * Handles must be live or (for `clustering`) null; `config` must point to a
 * valid config; `out` must be writable.
 */
enum SnStatus sn_model_train(const struct SnDataset *ds,
                             const struct SnClustering *clustering,
                             const struct SnTrainConfig *config,
                             struct SnModel **out);

/**
 * Number of values predicted per row: class count, or 1 for regression.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum SnStatus sn_model_output_dim(const struct SnModel *model, size_t *out);

/**
 * Writes fused predictions for every row of `ds` into `out`, row-major,
 * `n_rows × output_dim`.
 *
 * # Safety
 * Handles must be live; `out` must hold `len` doubles.
 */
enum SnStatus sn_model_predict(const struct SnModel *model,
                               const struct SnDataset *ds,
                               double *out,
                               size_t len);

/**
 * Accuracy (classification) or RMSE (regression) over every row of `ds`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum SnStatus sn_model_evaluate(const struct SnModel *model,
                                const struct SnDataset *ds,
                                double *out);

/**
 * # Safety
 * `model` must be a live handle; `path` a nul-terminated string.
 */
enum SnStatus sn_model_save(const struct SnModel *model, const char *path);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum SnStatus sn_model_load(const char *path, struct SnModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void sn_model_free(struct SnModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLITNN_H */

#ifndef CEGMIX_H
#define CEGMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CegmixStatus {
  CEGMIX_STATUS_OK = 0,
  CEGMIX_STATUS_NULL_POINTER = 1,
  CEGMIX_STATUS_INVALID_ARGUMENT = 2,
  // Data or partition failed validation.
  CEGMIX_STATUS_INVALID_INPUT = 3,
  // Sampler or estimator failure.
  CEGMIX_STATUS_NUMERICAL = 4,
  CEGMIX_STATUS_IO = 5,
  CEGMIX_STATUS_PARSE = 6,
  // Output buffer too small; the required length is still written.
  CEGMIX_STATUS_BUFFER_TOO_SMALL = 7,
  CEGMIX_STATUS_PANIC = 8,
} CegmixStatus;

typedef enum CegmixDataKind {
  CEGMIX_DATA_KIND_TRANSITIONS = 0,
  CEGMIX_DATA_KIND_HOLDING = 1,
} CegmixDataKind;

typedef struct CegmixDataset CegmixDataset;

typedef struct CegmixPartition CegmixPartition;

typedef struct CegmixSearchResult CegmixSearchResult;

// Settings for [`cegmix_select_clusters`]. Start from
// [`cegmix_search_options_default`].
typedef struct CegmixSearchOptions {
  size_t k_max;
  size_t chains;
  size_t warmup;
  size_t samples;
  uint64_t seed;
  // Known Weibull scale; ignored for transition data.
  double weibull_scale;
  // Gamma prior on the Weibull shape.
  double shape_prior_shape;
  double shape_prior_rate;
} CegmixSearchOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on the same thread.
const char *cegmix_last_error(void);

// Library version as a static string.
const char *cegmix_version(void);

// Transition counts for `n` situations, with ids `s0, s1, ...`.
//
// # Safety
// `successes` and `trials` must point to `n` values; `out` must be writable.
enum CegmixStatus cegmix_transitions_new(const uint64_t *successes,
                                         const uint64_t *trials,
                                         size_t n,
                                         struct CegmixDataset **out);

// Holding times for `n_edges` edges, ids `e0, e1, ...`. Edge `i` owns the
// next `lengths[i]` values of `times`.
//
// # Safety
// `lengths` must hold `n_edges` values and `times` their sum.
enum CegmixStatus cegmix_holding_new(const double *times,
                                     const size_t *lengths,
                                     size_t n_edges,
                                     struct CegmixDataset **out);

// Reads a dataset CSV; `kind` is a [`CegmixDataKind`] value.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum CegmixStatus cegmix_dataset_read_csv(const char *path,
                                          uint32_t kind,
                                          struct CegmixDataset **out);

// # Safety
// `data` must be a live dataset handle; `out` must be writable.
enum CegmixStatus cegmix_dataset_len(const struct CegmixDataset *data, size_t *out);

// # Safety
// `data` must come from this library and not be used afterwards. Null is a no-op.
void cegmix_dataset_free(struct CegmixDataset *data);

// Partition of a dataset's units from cluster tags, one per unit.
//
// # Safety
// `labels` must hold as many values as the dataset has units.
enum CegmixStatus cegmix_partition_new(const struct CegmixDataset *data,
                                       const size_t *labels,
                                       size_t n,
                                       struct CegmixPartition **out);

// # Safety
// `p` must be a live partition handle; outputs must be writable.
enum CegmixStatus cegmix_partition_size(const struct CegmixPartition *p,
                                        size_t *units,
                                        size_t *blocks);

// Copies block labels, numbered by first appearance, into `buf`.
//
// # Safety
// `buf` must hold `cap` values; `needed` must be writable.
enum CegmixStatus cegmix_partition_labels(const struct CegmixPartition *p,
                                          size_t *buf,
                                          size_t cap,
                                          size_t *needed);

// # Safety
// `p` must come from this library and not be used afterwards. Null is a no-op.
void cegmix_partition_free(struct CegmixPartition *p);

// Closed-form Beta-Binomial log evidence of a pooled cluster.
//
// # Safety
// `out` must be writable.
enum CegmixStatus cegmix_log_marginal_binomial(uint64_t successes,
                                               uint64_t trials,
                                               double alpha,
                                               double beta,
                                               double *out);

// Greedy agglomerative clustering of transition data under Beta(`alpha`, `beta`).
// `log_score` may be null.
//
// # Safety
// `data` must be live; `out` must be writable.
enum CegmixStatus cegmix_ahc_binomial(const struct CegmixDataset *data,
                                      double alpha,
                                      double beta,
                                      struct CegmixPartition **out,
                                      double *log_score);

// Greedy clustering of holding data with a known Weibull shape and a
// Gamma(`prior_shape`, `prior_rate`) prior on the Weibull rate.
//
// # Safety
// As for [`cegmix_ahc_binomial`].
enum CegmixStatus cegmix_ahc_weibull(const struct CegmixDataset *data,
                                     double shape,
                                     double prior_shape,
                                     double prior_rate,
                                     struct CegmixPartition **out,
                                     double *log_score);

// Best partition over all set partitions of at most 10 transition units.
//
// # Safety
// As for [`cegmix_ahc_binomial`].
enum CegmixStatus cegmix_exact_binomial(const struct CegmixDataset *data,
                                        double alpha,
                                        double beta,
                                        struct CegmixPartition **out,
                                        double *log_score);

// # Safety
// Both partitions must be live; `out` must be writable.
enum CegmixStatus cegmix_nmi(const struct CegmixPartition *pred,
                             const struct CegmixPartition *truth,
                             double *out);

// # Safety
// Both partitions must be live; `out` must be writable.
enum CegmixStatus cegmix_rand_index(const struct CegmixPartition *pred,
                                    const struct CegmixPartition *truth,
                                    double *out);

struct CegmixSearchOptions cegmix_search_options_default(void);

// Mixture model search over the number of clusters. Binomial for
// transition data, known-scale Weibull for holding data.
//
// # Safety
// `data` must be live; `options` may be null for defaults; `out` must be writable.
enum CegmixStatus cegmix_select_clusters(const struct CegmixDataset *data,
                                         const struct CegmixSearchOptions *options,
                                         struct CegmixSearchResult **out);

// # Safety
// `r` must be live; `out` must be writable.
enum CegmixStatus cegmix_search_result_k(const struct CegmixSearchResult *r, size_t *out);

// Copies the selected partition into a new handle.
//
// # Safety
// `r` must be live; `out` must be writable.
enum CegmixStatus cegmix_search_result_partition(const struct CegmixSearchResult *r,
                                                 struct CegmixPartition **out);

// Full result as JSON. Release the string with [`cegmix_string_free`].
//
// # Safety
// `r` must be live; `out` must be writable.
enum CegmixStatus cegmix_search_result_json(const struct CegmixSearchResult *r, char **out);

// # Safety
// `r` must come from this library and not be used afterwards. Null is a no-op.
void cegmix_search_result_free(struct CegmixSearchResult *r);

// # Safety
// `s` must come from this library and not be used afterwards. Null is a no-op.
void cegmix_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CEGMIX_H */

#ifndef HASHCLUST_H
#define HASHCLUST_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum HcStatus {
  HC_STATUS_OK = 0,
  HC_STATUS_NULL_POINTER = 1,
  HC_STATUS_INVALID_ARGUMENT = 2,
  HC_STATUS_INVALID_UTF8 = 3,
  HC_STATUS_HASH = 4,
  HC_STATUS_PE = 5,
  HC_STATUS_FEATURE = 6,
  HC_STATUS_CLUSTER = 7,
  HC_STATUS_PANIC = 8,
} HcStatus;

// Result of a K-Means fit.
typedef struct HcClustering HcClustering;

// Row-major feature matrix.
typedef struct HcMatrix HcMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next `hc_` call on the same thread.
const char *hc_last_error_message(void);

// Library version, a static NUL-terminated string.
const char *hc_version(void);

// Frees a string returned by this library. NULL is ignored.
void hc_string_free(char *s);

// SSDeep digest of `data` as `blocksize:coarse:fine`.
enum HcStatus hc_ssdeep_hash(const uint8_t *data, size_t len, char **out);

// Match score in 0..=100 between two SSDeep digests.
enum HcStatus hc_ssdeep_compare(const char *a, const char *b, uint32_t *out);

// TLSH digest of `data`, 70 lowercase hex characters without a version prefix.
enum HcStatus hc_tlsh_hash(const uint8_t *data, size_t len, char **out);

// TLSH distance with the length term. Accepts digests with or without `T1`.
enum HcStatus hc_tlsh_distance(const char *a, const char *b, uint32_t *out);

// IMPHash of a PE image as 32 lowercase hex characters.
enum HcStatus hc_imphash(const uint8_t *data, size_t len, char **out);

// Copies `n_rows * n_cols` row-major values into a new matrix. Values must
// be finite.
enum HcStatus hc_matrix_new(const double *values,
                            size_t n_rows,
                            size_t n_cols,
                            struct HcMatrix **out);

void hc_matrix_free(struct HcMatrix *m);

size_t hc_matrix_rows(const struct HcMatrix *m);

size_t hc_matrix_cols(const struct HcMatrix *m);

// Copies the matrix values, row-major, into `buf` of `cap` doubles.
enum HcStatus hc_matrix_values(const struct HcMatrix *m, double *buf, size_t cap);

// Column-wise z-score. Constant columns become zero.
enum HcStatus hc_matrix_standardize(const struct HcMatrix *m, struct HcMatrix **out);

// K-Means with k-means++ seeding and the library's default iteration,
// restart and tolerance settings.
enum HcStatus hc_kmeans_fit(const struct HcMatrix *m,
                            size_t k,
                            uint64_t seed,
                            struct HcClustering **out);

void hc_clustering_free(struct HcClustering *c);

size_t hc_clustering_k(const struct HcClustering *c);

double hc_clustering_inertia(const struct HcClustering *c);

// Copies one label per sample into `buf` of `cap` entries.
enum HcStatus hc_clustering_labels(const struct HcClustering *c, size_t *buf, size_t cap);

// Mean silhouette of `labels` (one per row) under Euclidean distance.
enum HcStatus hc_silhouette(const struct HcMatrix *m, const size_t *labels, size_t n, double *out);

// Adjusted Rand index between two labelings of `n` items.
enum HcStatus hc_adjusted_rand_index(const size_t *a, const size_t *b, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HASHCLUST_H */

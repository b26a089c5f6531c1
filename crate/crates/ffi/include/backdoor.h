#ifndef BACKDOOR_H
#define BACKDOOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum BdStatus {
  BD_STATUS_OK = 0,
  BD_STATUS_NULL_POINTER = 1,
  BD_STATUS_INVALID_UTF8 = 2,
  BD_STATUS_INVALID_INPUT = 3,
  BD_STATUS_INVALID_CONFIG = 4,
  BD_STATUS_SINGULAR = 5,
  BD_STATUS_DEGENERATE = 6,
  BD_STATUS_IO = 7,
  BD_STATUS_PARSE = 8,
  BD_STATUS_BUFFER_TOO_SMALL = 9,
  BD_STATUS_PANIC = 10,
} BdStatus;

/**
 * Column role.
 */
typedef enum BdRole {
  BD_ROLE_W = 0,
  BD_ROLE_X = 1,
  BD_ROLE_Y = 2,
  BD_ROLE_Z = 3,
  BD_ROLE_U = 4,
} BdRole;

/**
 * Opaque dataset handle.
 */
typedef struct BdDataset BdDataset;

/**
 * Opaque discovery result handle.
 */
typedef struct BdDiscoveryResult BdDiscoveryResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *bd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bd_version(void);

/**
 * Build a dataset from a column-major `n_rows * n_cols` array.
 *
 * # Safety
 * `values` must point to `n_rows * n_cols` doubles, `ids` to `n_cols`
 * NUL-terminated strings and `roles` to `n_cols` roles.
 */
enum BdStatus bd_dataset_from_columns(const double *values,
                                      size_t n_rows,
                                      size_t n_cols,
                                      const char *const *ids,
                                      const enum BdRole *roles,
                                      struct BdDataset **out);

/**
 * Read a CSV file whose header must match the keys of `roles_json`, a JSON
 * object mapping column id to "W", "X", "Y", "Z" or "U".
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum BdStatus bd_dataset_from_csv(const char *path, const char *roles_json, struct BdDataset **out);

/**
 * Rescale every column to unit variance in place. Estimates stay in the
 * original units.
 *
 * # Safety
 * `data` must be a live handle.
 */
enum BdStatus bd_dataset_standardize(struct BdDataset *data);

/**
 * # Safety
 * `data` must be a live handle or null.
 */
size_t bd_dataset_n_rows(const struct BdDataset *data);

/**
 * # Safety
 * `data` must be a live handle or null.
 */
size_t bd_dataset_n_cols(const struct BdDataset *data);

/**
 * # Safety
 * `data` must come from a `bd_dataset_*` constructor and not be used again.
 */
void bd_dataset_free(struct BdDataset *data);

/**
 * Learn an adjustment set. `config_json` may be null for defaults; given
 * fields override the defaults.
 *
 * # Safety
 * `data` must be a live handle, `config_json` null or NUL-terminated, `out`
 * writable.
 */
enum BdStatus bd_discover(const struct BdDataset *data,
                          const char *config_json,
                          struct BdDiscoveryResult **out);

/**
 * Number of Z covariates, which is the length of β.
 *
 * # Safety
 * `r` must be a live handle or null.
 */
size_t bd_result_dim(const struct BdDiscoveryResult *r);

/**
 * Copy the unit-norm β into `buf`, which needs `bd_result_dim` slots.
 *
 * # Safety
 * `r` must be a live handle and `buf` must hold `len` doubles.
 */
enum BdStatus bd_result_beta(const struct BdDiscoveryResult *r, double *buf, size_t len);

/**
 * Number of selected covariates.
 *
 * # Safety
 * `r` must be a live handle or null.
 */
size_t bd_result_n_selected(const struct BdDiscoveryResult *r);

/**
 * Copy the dataset column indices of the selected covariates into `buf`.
 * They can be passed directly to [`bd_backdoor_ate`].
 *
 * # Safety
 * `r` must be a live handle and `buf` must hold `len` elements.
 */
enum BdStatus bd_result_selected(const struct BdDiscoveryResult *r, size_t *buf, size_t len);

/**
 * Final objective value, or NaN for a null handle.
 *
 * # Safety
 * `r` must be a live handle or null.
 */
double bd_result_objective(const struct BdDiscoveryResult *r);

/**
 * # Safety
 * `r` must be a live handle or null.
 */
bool bd_result_converged(const struct BdDiscoveryResult *r);

/**
 * Full result as JSON. Release with [`bd_string_free`].
 *
 * # Safety
 * `r` must be a live handle; `out` writable.
 */
enum BdStatus bd_result_to_json(const struct BdDiscoveryResult *r, char **out);

/**
 * # Safety
 * `r` must come from [`bd_discover`] and not be used again.
 */
void bd_result_free(struct BdDiscoveryResult *r);

/**
 * # Safety
 * `s` must come from this library and not be used again.
 */
void bd_string_free(char *s);

/**
 * Backdoor ATE adjusting for the Z columns listed in `zstar`.
 *
 * # Safety
 * `data` must be a live handle, `zstar` must hold `len` indices, `out`
 * writable.
 */
enum BdStatus bd_backdoor_ate(const struct BdDataset *data,
                              const size_t *zstar,
                              size_t len,
                              double *out);

/**
 * Unadjusted regression of Y on X.
 *
 * # Safety
 * `data` must be a live handle, `out` writable.
 */
enum BdStatus bd_marginal_ate(const struct BdDataset *data, double *out);

/**
 * ATE adjusting for every Z column.
 *
 * # Safety
 * `data` must be a live handle, `out` writable.
 */
enum BdStatus bd_allz_ate(const struct BdDataset *data, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BACKDOOR_H */

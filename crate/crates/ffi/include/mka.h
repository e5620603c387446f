#ifndef MKA_H
#define MKA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible call.
 */
typedef enum MkaStatus {
  MKA_STATUS_OK = 0,
  MKA_STATUS_NULL_POINTER = 1,
  MKA_STATUS_INVALID_ARGUMENT = 2,
  MKA_STATUS_DIMENSION = 3,
  /*
   Not positive definite, singular, or no progress/convergence.
   */
  MKA_STATUS_NUMERIC = 4,
  MKA_STATUS_IO = 5,
  MKA_STATUS_PARSE = 6,
  MKA_STATUS_PANIC = 7,
} MkaStatus;

/*
 Opaque factorization handle.
 */
typedef struct MkaFactorization MkaFactorization;

/*
 Factorization parameters; see `mka_config_default`.
 */
typedef struct MkaConfig {
  double gamma;
  size_t d_core_target;
  size_t m_max;
  uint64_t rng_seed;
  size_t stage_cap;
} MkaConfig;

/*
 Stored-value counts of a factorization.
 */
typedef struct MkaStorage {
  size_t stages;
  size_t n;
  size_t d_core;
  size_t rotations;
  size_t rotation_values;
  size_t d_values;
  size_t core_values;
  size_t total;
  size_t bound;
} MkaStorage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failed call on this thread, or NULL. The
 pointer stays valid until the next call into this library on the same
 thread.
 */
const char *mka_last_error_message(void);

/*
 Fills `out` with the library defaults.

 # Safety
 `out` must be NULL or valid for writes.
 */
enum MkaStatus mka_config_default(struct MkaConfig *out);

/*
 Factorizes the symmetric `n`×`n` row-major matrix `data`. On success
 `*out` receives a handle to release with `mka_factorization_free`.

 # Safety
 `data` must point to `n*n` readable doubles, `cfg` to a config and `out`
 must be valid for writes.
 */
enum MkaStatus mka_factorize(const double *data,
                             size_t n,
                             const struct MkaConfig *cfg,
                             struct MkaFactorization **out);

/*
 Releases a handle. NULL is ignored.

 # Safety
 `f` must be NULL or a handle from this library not yet freed.
 */
void mka_factorization_free(struct MkaFactorization *f);

/*
 Order `n` of the factored matrix.

 # Safety
 `f` must be a live handle and `out` valid for writes.
 */
enum MkaStatus mka_factorization_order(const struct MkaFactorization *f, size_t *out);

/*
 Computes `out = K̃ z` for vectors of length `len`.

 # Safety
 `z` and `out` must each hold `len` doubles.
 */
enum MkaStatus mka_apply(const struct MkaFactorization *f,
                         const double *z,
                         double *out,
                         size_t len);

/*
 Solves `K̃ x = b` for vectors of length `len`.

 # Safety
 `b` and `out` must each hold `len` doubles.
 */
enum MkaStatus mka_solve(const struct MkaFactorization *f,
                         const double *b,
                         double *out,
                         size_t len);

/*
 Log-determinant of `K̃`.

 # Safety
 `f` must be a live handle and `out` valid for writes.
 */
enum MkaStatus mka_logdet(const struct MkaFactorization *f, double *out);

/*
 New handle for `K̃^alpha`.

 # Safety
 `f` must be a live handle and `out` valid for writes.
 */
enum MkaStatus mka_spectral_power(const struct MkaFactorization *f,
                                  double alpha,
                                  struct MkaFactorization **out);

/*
 New handle for `exp(t K̃)`.

 # Safety
 `f` must be a live handle and `out` valid for writes.
 */
enum MkaStatus mka_spectral_exp(const struct MkaFactorization *f,
                                double t,
                                struct MkaFactorization **out);

/*
 # Safety
 `f` must be a live handle and `out` valid for writes.
 */
enum MkaStatus mka_storage(const struct MkaFactorization *f, struct MkaStorage *out);

/*
 Serializes to a NUL-terminated JSON string, released with
 `mka_string_free`.

 # Safety
 `f` must be a live handle and `out` valid for writes.
 */
enum MkaStatus mka_to_json(const struct MkaFactorization *f, char **out);

/*
 Parses a factorization written by `mka_to_json`.

 # Safety
 `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum MkaStatus mka_from_json(const char *json, struct MkaFactorization **out);

/*
 Releases a string from `mka_to_json`. NULL is ignored.

 # Safety
 `s` must be NULL or a string from this library not yet freed.
 */
void mka_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MKA_H */

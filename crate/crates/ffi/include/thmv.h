#ifndef THMV_H
#define THMV_H

#include <stddef.h>
#include <stdint.h>

typedef enum ThmvMethod {
  THMV_METHOD_METHOD1 = 1,
  THMV_METHOD_METHOD2 = 2,
} ThmvMethod;

typedef enum ThmvSemiring {
  THMV_SEMIRING_BOOLEAN = 0,
  THMV_SEMIRING_NATURAL = 1,
} ThmvSemiring;

typedef enum ThmvStatus {
  THMV_STATUS_OK = 0,
  THMV_STATUS_NULL_POINTER = 1,
  THMV_STATUS_OVERFLOW = 2,
  THMV_STATUS_DIMENSION_MISMATCH = 3,
  THMV_STATUS_INDEX_OUT_OF_RANGE = 4,
  THMV_STATUS_DUPLICATE_ENTRY = 5,
  THMV_STATUS_ZERO_ENTRY = 6,
  THMV_STATUS_BUDGET_EXCEEDED = 7,
  THMV_STATUS_CAP_EXCEEDED = 8,
  THMV_STATUS_WRONG_PHASE = 9,
  THMV_STATUS_INVALID_QUERY = 10,
  THMV_STATUS_INVALID_PARAMETER = 11,
  THMV_STATUS_FIT = 12,
  THMV_STATUS_BUFFER_TOO_SMALL = 13,
  THMV_STATUS_PANIC = 14,
} ThmvStatus;

// Opaque Type-I oracle.
typedef struct ThmvType1 ThmvType1;

// Opaque Type-II oracle.
typedef struct ThmvType2 ThmvType2;

// Operation tallies for one phase.
typedef struct ThmvOps {
  uint64_t adds;
  uint64_t muls;
} ThmvOps;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Phase 1. `semiring` is a [`ThmvSemiring`] and `method` a [`ThmvMethod`].
// `m` holds `n*n` values and `vs` holds `k` consecutive `n*n`
// blocks. On success `*out` receives a handle owned by the caller.
//
// # Safety
// Pointers must be valid for the stated lengths; `out` must be writable.
enum ThmvStatus thmv_type1_new(uint32_t semiring,
                               uint32_t method,
                               size_t n,
                               size_t k,
                               double tau,
                               const uint64_t *m,
                               const uint64_t *vs,
                               struct ThmvType1 **out);

// Phase 2. Hint matrix `j` owns `nnz[j]` consecutive triples of
// `rows`/`cols`/`vals`. `ops` (nullable) receives the phase-2 tallies.
//
// # Safety
// `nnz` must hold `k` counts and the triple arrays their sum.
enum ThmvStatus thmv_type1_hint(struct ThmvType1 *h,
                                const size_t *nnz,
                                const size_t *rows,
                                const size_t *cols,
                                const uint64_t *vals,
                                struct ThmvOps *ops);

// Phase 3 for column `i`. Writes `n` values to `out`; `ops` (nullable)
// receives this query's tallies.
//
// # Safety
// `out` must be valid for `n` writes.
enum ThmvStatus thmv_type1_query(struct ThmvType1 *h, size_t i, uint64_t *out, struct ThmvOps *ops);

// Dimensions of a Type-I handle.
//
// # Safety
// `h` must be a live handle; `n` and `k` nullable.
enum ThmvStatus thmv_type1_dims(struct ThmvType1 *h, size_t *n, size_t *k);

// # Safety
// `h` must be null or a handle not yet freed.
void thmv_type1_free(struct ThmvType1 *h);

// Phase 1 (see [`thmv_type1_new`] for `semiring` and `method`). `vs` holds `k` consecutive row-major `n*d` blocks.
//
// # Safety
// Pointers must be valid for the stated lengths; `out` must be writable.
enum ThmvStatus thmv_type2_new(uint32_t semiring,
                               uint32_t method,
                               size_t n,
                               size_t d,
                               size_t k,
                               double tau,
                               const uint64_t *vs,
                               struct ThmvType2 **out);

// Phase 2: the diagonal entries `P_{idx[t]} = vals[t]` (1-based).
//
// # Safety
// `idx` and `vals` must be valid for `nnz` reads.
enum ThmvStatus thmv_type2_hint(struct ThmvType2 *h,
                                size_t nnz,
                                const size_t *idx,
                                const uint64_t *vals,
                                struct ThmvOps *ops);

// Phase 3. Fixes `dirs[t]` to `idx[t]` for `t < s` and writes the
// `rows x cols` row-major view to `out` (capacity `cap` values). Rows
// range over the first `ceil(m/2)` free directions, columns over the
// rest, last direction fastest. `rows`/`cols` are set even when the
// buffer is too small.
//
// # Safety
// `dirs`/`idx` valid for `s` reads, `out` for `cap` writes.
enum ThmvStatus thmv_type2_query(struct ThmvType2 *h,
                                 size_t s,
                                 const size_t *dirs,
                                 const size_t *idx,
                                 uint64_t *out,
                                 size_t cap,
                                 size_t *rows,
                                 size_t *cols,
                                 struct ThmvOps *ops);

// # Safety
// `h` must be null or a handle not yet freed.
void thmv_type2_free(struct ThmvType2 *h);

// Least-squares slope of `log2(counts)` against `log2(ns)`.
//
// # Safety
// `ns` and `counts` valid for `len` reads; outputs nullable.
enum ThmvStatus thmv_fit_exponent(const double *ns,
                                  const double *counts,
                                  size_t len,
                                  double *slope,
                                  double *intercept,
                                  double *r2);

// Message for the last failed call on this thread, or null. Valid until
// the next failing call on the same thread.
const char *thmv_last_error_message(void);

// Static name of a status code.
const char *thmv_status_name(enum ThmvStatus status);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* THMV_H */

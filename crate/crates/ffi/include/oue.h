#ifndef OUE_H
#define OUE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum OueStatus {
  OUE_STATUS_OK = 0,
  OUE_STATUS_NULL_POINTER = 1,
  OUE_STATUS_INVALID_ARGUMENT = 2,
  OUE_STATUS_INTEGRATION_FAILURE = 3,
  OUE_STATUS_RESOLUTION = 4,
  OUE_STATUS_RESOURCE = 5,
  OUE_STATUS_IO = 6,
  OUE_STATUS_PANIC = 7,
} OueStatus;

/**
 * A Galerkin box with its interaction table, Gaussian scale and temperature.
 */
typedef struct OueContext OueContext;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *oue_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *oue_version(void);

/**
 * `H_n^c(x)`, the orthonormal Hermite polynomial.
 *
 * # Safety
 *
 * `out` is null or valid for one write.
 */
enum OueStatus oue_hermite(size_t n, double c, double x, double *out);

/**
 * `Θ(n, m, r)`; zero outside `0 ≤ r ≤ min(n, m)`.
 */
double oue_theta(int64_t n, int64_t m, int64_t r);

/**
 * The c-free interaction coefficient `A(p, q, k)`.
 */
double oue_interaction(uint32_t p1,
                       uint32_t p2,
                       uint32_t q1,
                       uint32_t q2,
                       uint32_t k1,
                       uint32_t k2);

/**
 * Builds the context for the box `0 ≤ k1, k2 ≤ max_index`. Free it with
 * [`oue_context_free`].
 *
 * # Safety
 *
 * `out` is null or valid for one write.
 */
enum OueStatus oue_context_new(uint32_t max_index, double c, double gamma, struct OueContext **out);

/**
 * Releases a context. Null is ignored.
 *
 * # Safety
 *
 * `ctx` is null or came from [`oue_context_new`] and has not been freed.
 */
void oue_context_free(struct OueContext *ctx);

/**
 * Number of modes in the basis, or 0 for a null context.
 *
 * # Safety
 *
 * `ctx` is null or a live context.
 */
size_t oue_context_len(const struct OueContext *ctx);

/**
 * The multi-index at position `i` of the basis order.
 *
 * # Safety
 *
 * `ctx` is null or a live context; `k1` and `k2` are null or valid for one write.
 */
enum OueStatus oue_context_mode(const struct OueContext *ctx, size_t i, uint32_t *k1, uint32_t *k2);

/**
 * `B(φ)` into `out` (`2 * len` doubles).
 *
 * # Safety
 *
 * `ctx` is null or a live context; `phi` and `out` are null or valid for `2 * len` doubles.
 */
enum OueStatus oue_vector_field(const struct OueContext *ctx,
                                const double *phi,
                                size_t len,
                                double *out);

/**
 * `div_μ B(φ)` in real coordinates.
 *
 * # Safety
 *
 * `ctx` is null or a live context; `phi` is null or valid for `2 * len` doubles; `out` is null or valid for one write.
 */
enum OueStatus oue_divergence(const struct OueContext *ctx,
                              const double *phi,
                              size_t len,
                              double *out);

/**
 * Draw number `index` of the stream `seed` from the Gaussian measure.
 * Nonzero `real_mode` draws real coefficients only.
 *
 * # Safety
 *
 * `ctx` is null or a live context; `out` is null or valid for `2 * oue_context_len(ctx)` doubles.
 */
enum OueStatus oue_sample(const struct OueContext *ctx,
                          uint64_t seed,
                          uint64_t index,
                          int32_t real_mode,
                          double *out);

/**
 * The Galerkin flow `U_t φ` at tolerance `tol`.
 *
 * # Safety
 *
 * `ctx` is null or a live context; `phi` and `out` are null or valid for `2 * len` doubles.
 */
enum OueStatus oue_flow(const struct OueContext *ctx,
                        const double *phi,
                        size_t len,
                        double t,
                        double tol,
                        double *out);

/**
 * The Radon-Nikodym density `k_t(φ)`.
 *
 * # Safety
 *
 * `ctx` is null or a live context; `phi` is null or valid for `2 * len` doubles; `out` is null or valid for one write.
 */
enum OueStatus oue_density(const struct OueContext *ctx,
                           const double *phi,
                           size_t len,
                           double t,
                           double tol,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OUE_H */

#ifndef TRIDENT_H
#define TRIDENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TRIDENT_MODEL_LINEAR = 0,
  TRIDENT_MODEL_LOGISTIC = 1,
} TridentModel;

typedef enum {
  TRIDENT_MSB_MODE_A2B_FALLBACK = 0,
  TRIDENT_MSB_MODE_PAPER_BITEXT = 1,
} TridentMsbMode;

/**
 * Result of every exported call.
 */
typedef enum {
  TRIDENT_STATUS_OK = 0,
  TRIDENT_STATUS_NULL_POINTER = 1,
  TRIDENT_STATUS_INVALID_ARGUMENT = 2,
  TRIDENT_STATUS_PARSE = 3,
  TRIDENT_STATUS_ABORT = 4,
  TRIDENT_STATUS_IO = 5,
  TRIDENT_STATUS_PANIC = 6,
} TridentStatus;

/**
 * Opaque session handle.
 */
typedef struct TridentSession TridentSession;

/**
 * Measured cost of one protocol, totalled over all instances.
 */
typedef struct {
  uint64_t offline_rounds;
  uint64_t offline_bits;
  uint64_t online_rounds;
  uint64_t online_bits;
  uint64_t expected_online_rounds;
  uint64_t expected_online_bits_per_instance;
  /**
   * 1 when the measured cost equals the closed form exactly.
   */
  uint8_t pass;
} TridentCost;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *trident_last_error(void);

/**
 * Creates a session over Z_{2^ring_bits} with `frac_bits` fractional bits.
 *
 * # Safety
 * `seed` must point to `seed_len` bytes; `out` must be writable.
 */
TridentStatus trident_session_new(const uint8_t *seed,
                                  uintptr_t seed_len,
                                  uint32_t ring_bits,
                                  uint32_t frac_bits,
                                  TridentSession **out);

/**
 * # Safety
 * `s` must come from `trident_session_new` and not be used afterwards.
 */
void trident_session_free(TridentSession *s);

/**
 * # Safety
 * `s` must be a live session.
 */
TridentStatus trident_session_set_msb_mode(TridentSession *s, TridentMsbMode mode);

/**
 * Fixed-point encoding of `x` in the session's ring.
 *
 * # Safety
 * `s` must be a live session and `out` writable.
 */
TridentStatus trident_encode(const TridentSession *s, double x, uint64_t *out);

/**
 * # Safety
 * `s` must be a live session and `out` writable.
 */
TridentStatus trident_decode(const TridentSession *s, uint64_t raw, double *out);

/**
 * Element-wise product of `x` (owned by P1) and `y` (owned by P2).
 *
 * # Safety
 * `x`, `y` and `out` must each hold `n` values.
 */
TridentStatus trident_mult(const TridentSession *s,
                           const uint64_t *x,
                           const uint64_t *y,
                           uintptr_t n,
                           uint64_t *out);

/**
 * ReLU of fixed-point inputs owned by P1.
 *
 * # Safety
 * `x` and `out` must each hold `n` values.
 */
TridentStatus trident_relu(const TridentSession *s, const uint64_t *x, uintptr_t n, uint64_t *out);

/**
 * Piecewise-linear sigmoid of fixed-point inputs owned by P1.
 *
 * # Safety
 * `x` and `out` must each hold `n` values.
 */
TridentStatus trident_sigmoid(const TridentSession *s,
                              const uint64_t *x,
                              uintptr_t n,
                              uint64_t *out);

/**
 * Trains on `rows` fixed-point samples owned by P1 and writes the opened
 * weights. `x` is row-major with `features` columns; the learning rate is
 * 2^-lr_log2.
 *
 * # Safety
 * `x` must hold `rows * features` values, `y` `rows`, `weights` `features`.
 */
TridentStatus trident_train(const TridentSession *s,
                            TridentModel model,
                            const uint64_t *x,
                            const uint64_t *y,
                            uintptr_t rows,
                            uintptr_t features,
                            uintptr_t iterations,
                            uintptr_t batch,
                            uint32_t lr_log2,
                            uint64_t *weights);

/**
 * The same training in the clear, for comparison.
 *
 * # Safety
 * As for `trident_train`.
 */
TridentStatus trident_train_plain(const TridentSession *s,
                                  TridentModel model,
                                  const uint64_t *x,
                                  const uint64_t *y,
                                  uintptr_t rows,
                                  uintptr_t features,
                                  uintptr_t iterations,
                                  uintptr_t batch,
                                  uint32_t lr_log2,
                                  uint64_t *weights);

/**
 * Measures `count` instances of the named protocol.
 *
 * # Safety
 * `protocol` must be a NUL-terminated string and `out` writable.
 */
TridentStatus trident_bench(const TridentSession *s,
                            const char *protocol,
                            uintptr_t count,
                            TridentCost *out);

/**
 * Runs tamper scenarios (the bundled suite when `scenarios` is null) and
 * reports how many ran and how many broke the abort-or-correct guarantee.
 *
 * # Safety
 * `scenarios` must be null or NUL-terminated; outputs must be writable.
 */
TridentStatus trident_adversary(const TridentSession *s,
                                const char *scenarios,
                                uintptr_t *total,
                                uintptr_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIDENT_H */

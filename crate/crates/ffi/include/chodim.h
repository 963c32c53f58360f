#ifndef CHODIM_H
#define CHODIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum ChodimStatus {
  CHODIM_STATUS_OK = 0,
  CHODIM_STATUS_NULL_POINTER = 1,
  CHODIM_STATUS_INVALID_ARGUMENT = 2,
  CHODIM_STATUS_CONFIG = 3,
  CHODIM_STATUS_DEGENERATE_FRAME = 4,
  CHODIM_STATUS_NOT_POSITIVE_DEFINITE = 5,
  CHODIM_STATUS_BLOW_UP = 6,
  CHODIM_STATUS_IO = 7,
  CHODIM_STATUS_INTERNAL = 8,
} ChodimStatus;

// Opaque integrator handle owning the current state and time.
typedef struct ChodimStepper ChodimStepper;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call into this library on the same thread.
const char *chodim_last_error(void);

// Library version as a static NUL-terminated string.
const char *chodim_version(void);

// Creates a stepper from a JSON object with keys `grid`, `phys`, `dt` and
// optionally `initial_amplitude`; the state is the seeded random start.
//
// # Safety
// `config_json` must be a NUL-terminated string and `out` a valid pointer.
enum ChodimStatus chodim_stepper_new(const char *config_json,
                                     uint64_t seed,
                                     struct ChodimStepper **out);

// Releases a stepper. Null is ignored.
//
// # Safety
// `handle` must come from [`chodim_stepper_new`] and not be used afterwards.
void chodim_stepper_free(struct ChodimStepper *handle);

// Advances by `n_steps` steps. On blow-up the handle keeps the last finite state.
//
// # Safety
// `handle` must be a live stepper.
enum ChodimStatus chodim_stepper_step(struct ChodimStepper *handle, size_t n_steps);

// # Safety
// `handle` must be a live stepper and `out` a valid pointer.
enum ChodimStatus chodim_stepper_time(const struct ChodimStepper *handle, double *out);

// Energy functional of the current state.
//
// # Safety
// `handle` must be a live stepper and `out` a valid pointer.
enum ChodimStatus chodim_stepper_energy(const struct ChodimStepper *handle, double *out);

// Energy-space norm of the current state.
//
// # Safety
// `handle` must be a live stepper and `out` a valid pointer.
enum ChodimStatus chodim_stepper_norm(const struct ChodimStepper *handle, double *out);

// Length of the state buffer: `4 × modes` doubles, laid out as
// `(Re u, Im u)` per mode followed by `(Re ∂t u, Im ∂t u)` per mode.
//
// # Safety
// `handle` must be a live stepper or null (returns 0).
size_t chodim_stepper_state_len(const struct ChodimStepper *handle);

// Copies the state into `buf`, which must hold `chodim_stepper_state_len` doubles.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum ChodimStatus chodim_stepper_get_state(const struct ChodimStepper *handle,
                                           double *buf,
                                           size_t len);

// Replaces the state from a buffer in the layout of [`chodim_stepper_get_state`].
//
// # Safety
// `buf` must point to `len` readable doubles.
enum ChodimStatus chodim_stepper_set_state(struct ChodimStepper *handle,
                                           const double *buf,
                                           size_t len);

// Largest expansion factor of `d`-dimensional volumes under `matrix`,
// measured in the inner product `metric` (identity when null).
//
// # Safety
// `matrix` (and `metric` if non-null) must point to `n * n` doubles.
enum ChodimStatus chodim_omega_d(const double *matrix,
                                 const double *metric,
                                 size_t n,
                                 size_t d,
                                 double *out);

// Largest trace of `matrix` over `d`-dimensional subspaces, measured in
// `metric` (identity when null).
//
// # Safety
// `matrix` (and `metric` if non-null) must point to `n * n` doubles.
enum ChodimStatus chodim_trace_d(const double *matrix,
                                 const double *metric,
                                 size_t n,
                                 size_t d,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHODIM_H */

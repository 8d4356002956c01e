#ifndef EDLAB_H
#define EDLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every function.
typedef enum EdStatus {
  ED_STATUS_OK = 0,
  ED_STATUS_NULL_POINTER = 1,
  ED_STATUS_INVALID_ARGUMENT = 2,
  // Configuration, parse or validation problem.
  ED_STATUS_CONFIG = 3,
  // Numerical failure in the core (node error, solver divergence, ...).
  ED_STATUS_NUMERICAL = 4,
  // A run finished but its acceptance checks failed.
  ED_STATUS_CHECK_FAILED = 5,
  // File system or checkpoint format error.
  ED_STATUS_IO = 6,
  ED_STATUS_PANIC = 7,
} EdStatus;

typedef enum EdPotentialKind {
  ED_POTENTIAL_KIND_FREE = 0,
  // `strength` is the spring constant.
  ED_POTENTIAL_KIND_PAIR_SPRING = 1,
  // `strength` is the depth, `width` the range.
  ED_POTENTIAL_KIND_PAIR_GAUSSIAN = 2,
  // `strength` is the trap frequency.
  ED_POTENTIAL_KIND_EXTERNAL_HARMONIC = 3,
} EdPotentialKind;

typedef enum EdBackend {
  ED_BACKEND_SPLIT_STEP = 0,
  ED_BACKEND_CRANK_NICOLSON = 1,
} EdBackend;

typedef enum EdCommand {
  ED_COMMAND_EVOLVE = 0,
  ED_COMMAND_BEST_MATCH = 1,
  ED_COMMAND_SAMPLE = 2,
  ED_COMMAND_PARAMETRIZED = 3,
} EdCommand;

// Opaque periodic configuration-space grid.
typedef struct EdGrid EdGrid;

// Opaque wave function on a grid.
typedef struct EdState EdState;

// Opaque particle system (masses, hbar, eta).
typedef struct EdSystem EdSystem;

typedef struct EdPotential {
  enum EdPotentialKind kind;
  double strength;
  double width;
} EdPotential;

// Rigid shift velocity. Components beyond the spatial dimension must be
// zero; in 2D only `zeta_dot[2]` may be nonzero.
typedef struct EdShift {
  double lambda_dot[3];
  double zeta_dot[3];
} EdShift;

typedef struct EdObservables {
  double time;
  double norm;
  double energy;
  double momentum[3];
  double angular_momentum[3];
  double center_of_mass[3];
  // Row-major 3x3 inertia tensor.
  double inertia[9];
} EdObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread. Valid until the next failing
// call on the same thread; never NULL.
const char *ed_last_error(void);

// Library version as a static NUL-terminated string.
const char *ed_version(void);

// Creates a grid with `spatial_dim * particle_count` axes.
//
// # Safety
// `points` and `lengths` must each point to `spatial_dim * particle_count`
// readable values; `out` must be writable.
enum EdStatus ed_grid_new(size_t spatial_dim,
                          size_t particle_count,
                          const size_t *points,
                          const double *lengths,
                          struct EdGrid **out);

// # Safety
// `grid` must come from [`ed_grid_new`] and not be freed twice. NULL is a no-op.
void ed_grid_free(struct EdGrid *grid);

// Number of grid points.
//
// # Safety
// `grid` must be a live handle; `out` must be writable.
enum EdStatus ed_grid_len(const struct EdGrid *grid, size_t *out);

// Creates a particle system. Pass `eta <= 0` for `eta = hbar`.
//
// # Safety
// `masses` must point to `count` readable values; `out` must be writable.
enum EdStatus ed_system_new(const double *masses,
                            size_t count,
                            double hbar,
                            double eta,
                            struct EdSystem **out);

// # Safety
// `system` must come from this library and not be freed twice. NULL is a no-op.
void ed_system_free(struct EdSystem *system);

// Product Gaussian packet. `centers` holds `particle_count * spatial_dim`
// values (particle-major), `widths` one per particle and `wavevectors` one
// per configuration axis.
//
// # Safety
// Pointers must be live handles or arrays of the sizes above; `out` must be
// writable.
enum EdStatus ed_state_gaussian(const struct EdGrid *grid,
                                const struct EdSystem *system,
                                const double *centers,
                                const double *widths,
                                const double *wavevectors,
                                struct EdState **out);

// Single-particle 2D vortex `(x + i y)^charge exp(-r^2 / 2 width^2)`.
//
// # Safety
// `grid` must be a live handle; `out` must be writable.
enum EdStatus ed_state_vortex(const struct EdGrid *grid,
                              double width,
                              int32_t charge,
                              struct EdState **out);

// State from interleaved `(re, im)` amplitudes in row-major axis order.
//
// # Safety
// `amplitudes` must point to `2 * len` readable values where `len` is the
// grid size; `out` must be writable.
enum EdStatus ed_state_from_amplitudes(const struct EdGrid *grid,
                                       const double *amplitudes,
                                       size_t len,
                                       double time,
                                       struct EdState **out);

// # Safety
// `state` must come from this library and not be freed twice. NULL is a no-op.
void ed_state_free(struct EdState *state);

// Number of amplitudes and the state's time stamp.
//
// # Safety
// `state` must be a live handle; out pointers may be NULL when not wanted.
enum EdStatus ed_state_info(const struct EdState *state, size_t *len, double *time);

// Copies interleaved `(re, im)` amplitudes into `out`, which must hold
// `2 * len` values.
//
// # Safety
// `state` must be a live handle; `out` must point to `2 * len` writable values.
enum EdStatus ed_state_amplitudes(const struct EdState *state, double *out, size_t len);

// Observable functionals of `state` under the shifted Hamiltonian.
//
// # Safety
// All pointers must be live handles or valid structs; `out` must be writable.
enum EdStatus ed_observables(const struct EdState *state,
                             const struct EdSystem *system,
                             const struct EdPotential *potential_spec,
                             const struct EdShift *shift_velocity,
                             struct EdObservables *out);

// Evolves `state` by `steps` steps of size `dt` under a fixed shift and
// returns the final state as a new handle.
//
// # Safety
// All pointers must be live handles or valid structs; `out` must be writable.
enum EdStatus ed_evolve(const struct EdState *state,
                        const struct EdSystem *system,
                        const struct EdPotential *potential_spec,
                        const struct EdShift *shift_velocity,
                        double dt,
                        size_t steps,
                        enum EdBackend solver,
                        double tolerance,
                        struct EdState **out);

// Analytic best-matching shift: translation `P / M`, and with `rotational`
// set also `zeta_dot = I^-1 L` (the state must be centered).
//
// # Safety
// All pointers must be live handles or valid structs; `out` must be writable.
enum EdStatus ed_best_match(const struct EdState *state,
                            const struct EdSystem *system,
                            const struct EdPotential *potential_spec,
                            double dt,
                            bool rotational,
                            struct EdShift *out);

// Writes a binary checkpoint of `state`.
//
// # Safety
// Handles must be live; `file` must be a NUL-terminated UTF-8 path.
enum EdStatus ed_checkpoint_write(const struct EdState *state,
                                  const struct EdSystem *system,
                                  const char *file);

// Reads a checkpoint into new state and system handles. Nothing is written
// to the out pointers on failure.
//
// # Safety
// `file` must be a NUL-terminated UTF-8 path; out pointers must be writable.
enum EdStatus ed_checkpoint_read(const char *file,
                                 struct EdState **state_out,
                                 struct EdSystem **system_out);

// Runs a configured experiment and writes its artifacts like the CLI does.
//
// # Safety
// `config` must be a NUL-terminated UTF-8 path.
enum EdStatus ed_run_config(const char *config, enum EdCommand command);

// Runs the built-in invariant suite, writing `verify.json` and
// `observables.csv` into `output_dir`. Returns `CheckFailed` if any check
// fails; `passed` and `total` receive the counts when non-NULL.
//
// # Safety
// `output_dir` must be a NUL-terminated UTF-8 path; count pointers may be NULL.
enum EdStatus ed_verify(const char *output_dir, uint64_t seed, size_t *passed, size_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDLAB_H */

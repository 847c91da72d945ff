#ifndef TRANSONIC_H
#define TRANSONIC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Column selector for [`transonic_background_column`].
typedef enum TransonicColumn {
  TRANSONIC_COLUMN_X1 = 0,
  TRANSONIC_COLUMN_VELOCITY = 1,
  TRANSONIC_COLUMN_DENSITY = 2,
  TRANSONIC_COLUMN_SOUND_SPEED_SQUARED = 3,
  TRANSONIC_COLUMN_K11 = 4,
  TRANSONIC_COLUMN_K1 = 5,
  TRANSONIC_COLUMN_MACH = 6,
} TransonicColumn;

// Status codes. The first four match the command line exit codes.
typedef enum TransonicStatus {
  TRANSONIC_STATUS_OK = 0,
  // File or serialization failure.
  TRANSONIC_STATUS_IO = 1,
  // Malformed or invalid configuration, or a force outside the supported class.
  TRANSONIC_STATUS_CONFIG = 2,
  // A solve did not converge or an assembled system was singular.
  TRANSONIC_STATUS_CONVERGENCE = 3,
  // The multiplier or extension certificate could not be established.
  TRANSONIC_STATUS_CERTIFICATE = 4,
  TRANSONIC_STATUS_NULL_ARGUMENT = 10,
  TRANSONIC_STATUS_INVALID_UTF8 = 11,
  TRANSONIC_STATUS_OUT_OF_RANGE = 12,
  TRANSONIC_STATUS_BUFFER_TOO_SMALL = 13,
  TRANSONIC_STATUS_PANIC = 99,
} TransonicStatus;

// One-dimensional background flow on the configured grid.
typedef struct TransonicBackground TransonicBackground;

// Parsed and validated run configuration.
typedef struct TransonicConfig TransonicConfig;

// Converged fixed point with its report.
typedef struct TransonicSolution TransonicSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *transonic_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *transonic_version(void);

// Parse configuration text. On success `*out` owns a new handle.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum TransonicStatus transonic_config_parse(const char *text, struct TransonicConfig **out);

// Override the perturbation amplitude.
//
// # Safety
// `cfg` must be a live handle from [`transonic_config_parse`].
enum TransonicStatus transonic_config_set_eps(struct TransonicConfig *cfg, double eps);

// # Safety
// `cfg` must be null or a handle not yet freed.
void transonic_config_free(struct TransonicConfig *cfg);

// Solve the background flow for `cfg` (calibrating the force if requested).
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum TransonicStatus transonic_background_solve(const struct TransonicConfig *cfg,
                                                struct TransonicBackground **out);

// Number of grid nodes, or 0 for a null handle.
//
// # Safety
// `bg` must be null or a live handle.
size_t transonic_background_len(const struct TransonicBackground *bg);

// Sonic speed c* and mass flux J.
//
// # Safety
// `bg` must be a live handle; `c_star` and `j` valid pointers.
enum TransonicStatus transonic_background_constants(const struct TransonicBackground *bg,
                                                    double *c_star,
                                                    double *j);

// Copy one nodal column into `buf`, which must hold `transonic_background_len` values.
//
// # Safety
// `bg` must be a live handle and `buf` valid for `cap` writes.
enum TransonicStatus transonic_background_column(const struct TransonicBackground *bg,
                                                 enum TransonicColumn column,
                                                 double *buf,
                                                 size_t cap);

// # Safety
// `bg` must be null or a handle not yet freed.
void transonic_background_free(struct TransonicBackground *bg);

// Run the full fixed point for `cfg`.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum TransonicStatus transonic_solve(const struct TransonicConfig *cfg,
                                     struct TransonicSolution **out);

// Iteration count, final contraction ratio and ‖φ−φ̄‖ in H²ᵣ.
//
// # Safety
// `sol` must be a live handle; the output pointers valid.
enum TransonicStatus transonic_solution_summary(const struct TransonicSolution *sol,
                                                size_t *iterations,
                                                double *max_ratio,
                                                double *h2_norm);

// Number of radial nodes on the sonic front.
//
// # Safety
// `sol` must be null or a live handle.
size_t transonic_solution_front_len(const struct TransonicSolution *sol);

// Copy the front `x1 = xi(r)` into `r` and `xi`, each holding `cap` values.
//
// # Safety
// `sol` must be a live handle; `r` and `xi` valid for `cap` writes.
enum TransonicStatus transonic_solution_front(const struct TransonicSolution *sol,
                                              double *r,
                                              double *xi,
                                              size_t cap);

// Velocity `(u1, ur)` at grid node `(i, q)`: x₁-node `i`, radial node `q`.
//
// # Safety
// `sol` must be a live handle; `u1`, `ur` valid pointers.
enum TransonicStatus transonic_solution_velocity(const struct TransonicSolution *sol,
                                                 size_t i,
                                                 size_t q,
                                                 double *u1,
                                                 double *ur);

// Solve report as a JSON string owned by the caller; release it with
// [`transonic_string_free`]. Returns null on failure.
//
// # Safety
// `sol` must be a live handle.
char *transonic_solution_report_json(const struct TransonicSolution *sol);

// # Safety
// `sol` must be null or a handle not yet freed.
void transonic_solution_free(struct TransonicSolution *sol);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void transonic_string_free(char *s);

// Run the command line tool with `argc` arguments (program name first) and
// return its exit code.
//
// # Safety
// `argv` must hold `argc` NUL-terminated strings.
int transonic_run(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSONIC_H */

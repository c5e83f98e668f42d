/* C interface to the qert expected-runtime analyzer.
* Strings returned through `char **` out-parameters are heap-allocated
* and must be released with qert_string_free(). */

#ifndef QERT_H
#define QERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum QertStatus {
  /**
   * The call succeeded.
   */
  QertStatus_Ok = 0,
  /**
   * A required pointer argument was NULL.
   */
  QertStatus_NullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  QertStatus_InvalidUtf8 = 2,
  /**
   * The program text could not be parsed.
   */
  QertStatus_ParseError = 3,
  /**
   * The program parsed but failed static validation.
   */
  QertStatus_ValidationError = 4,
  /**
   * An argument was structurally valid but semantically unusable
   * (bad state description, dimension mismatch, out-of-range option).
   */
  QertStatus_BadArgument = 5,
  /**
   * The analysis itself failed (non-contractive transfer operator,
   * singular linear system).
   */
  QertStatus_AnalysisError = 6,
  /**
   * An internal invariant was violated; the library state is still sound.
   */
  QertStatus_InternalError = 7,
} QertStatus;

/**
 * Opaque handle to a parsed and validated program.
 */
typedef struct QertProgram QertProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *qert_version(void);

/**
 * Message for the most recent failure on the calling thread, as a
 * NUL-terminated UTF-8 string. Empty when the last call succeeded. The
 * pointer stays valid until the next failing call on this thread; do not
 * free it.
 */
const char *qert_last_error_message(void);

/**
 * Parses and validates program text. On success writes a fresh handle to
 * `out`; release it with `qert_program_free`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QertStatus qert_program_parse(const char *source, struct QertProgram **out);

/**
 * Releases a handle returned by `qert_program_parse`. NULL is a no-op.
 *
 * # Safety
 * `program` must be NULL or a handle not freed before.
 */
void qert_program_free(struct QertProgram *program);

/**
 * Total Hilbert-space dimension of the program's variables (the product of
 * the declared variable dimensions). Returns 0 if `program` is NULL.
 *
 * # Safety
 * `program` must be NULL or a live handle.
 */
uintptr_t qert_program_dimension(const struct QertProgram *program);

/**
 * Writes the canonical text rendering of the program to `out`.
 * Release the string with `qert_string_free`.
 *
 * # Safety
 * `program` must be a live handle and `out` a valid pointer.
 */
enum QertStatus qert_program_pretty(const struct QertProgram *program, char **out);

/**
 * Runs the static expected-runtime analysis and writes the full report as
 * pretty-printed JSON to `out_json`. Release the string with
 * `qert_string_free`.
 *
 * `rho_spec` selects the input state: a ket string such as `"|1>"` or
 * `"L,1"`, the literal `"maximally-mixed"`, or an inline JSON density
 * matrix `{"rows":..,"cols":..,"data":[[re,im],..]}` with `data` row-major.
 *
 * Options (pass the neutral value to disable):
 * * `eps_spec` — spectral-gap cutoff in (0, 1); pass a value <= 0 for the
 *   built-in default.
 * * `unfolding_terms` — number of truncated-series cross-check terms to
 *   include in the report; 0 omits the series.
 * * `mc_shots` — Monte-Carlo cross-check trajectories; 0 omits the run.
 *   `mc_max_steps` caps each trajectory (0 selects the default cap) and
 *   `mc_seed` fixes the generator.
 *
 * # Safety
 * `program` must be a live handle, `rho_spec` a NUL-terminated string, and
 * `out_json` a valid pointer.
 */
enum QertStatus qert_analyze(const struct QertProgram *program,
                             const char *rho_spec,
                             double eps_spec,
                             uintptr_t unfolding_terms,
                             uint64_t mc_shots,
                             uint64_t mc_max_steps,
                             uint64_t mc_seed,
                             char **out_json);

/**
 * Runs trajectory sampling only and writes the summary as pretty-printed
 * JSON (`mean`, `stderr`, `shots`, `timeouts`, `seed`) to `out_json`.
 * `mean`/`stderr` are JSON `null` when every trajectory hit the step cap.
 * `shots` must be at least 1; `max_steps` of 0 selects the default cap.
 * Release the string with `qert_string_free`.
 *
 * # Safety
 * `program` must be a live handle, `rho_spec` a NUL-terminated string, and
 * `out_json` a valid pointer.
 */
enum QertStatus qert_simulate(const struct QertProgram *program,
                              const char *rho_spec,
                              uint64_t shots,
                              uint64_t max_steps,
                              uint64_t seed,
                              char **out_json);

/**
 * Releases a string returned through a `char **` out-parameter.
 * NULL is a no-op.
 *
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void qert_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QERT_H */

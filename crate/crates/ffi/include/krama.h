#ifndef KRAMA_H
#define KRAMA_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum KramaStatus {
  KRAMA_STATUS_OK = 0,
  /**
   * The plan was processed but its sequence is not valid, not
   * derivable, or disagrees with direct execution.
   */
  KRAMA_STATUS_INVALID = 1,
  KRAMA_STATUS_PARSE_ERROR = 2,
  /**
   * The composition could not be built or evaluated.
   */
  KRAMA_STATUS_PLAN_ERROR = 3,
  KRAMA_STATUS_NULL_POINTER = 4,
  KRAMA_STATUS_UTF8 = 5,
  /**
   * The plan has more instructions than the enumeration bound.
   */
  KRAMA_STATUS_TOO_LARGE = 6,
  KRAMA_STATUS_INTERNAL = 7,
} KramaStatus;

/**
 * Where consecutive dependencies come from.
 */
typedef enum KramaDeps {
  KRAMA_DEPS_INFERRED = 0,
  KRAMA_DEPS_DECLARED = 1,
} KramaDeps;

/**
 * Three-valued evaluation result.
 */
typedef enum KramaEval {
  KRAMA_EVAL_SATISFIED = 0,
  KRAMA_EVAL_VIOLATED = 1,
  KRAMA_EVAL_NOT_APPLICABLE = 2,
} KramaEval;

/**
 * A parsed plan document.
 */
typedef struct KramaPlan KramaPlan;

/**
 * Counts from an oracle run.
 */
typedef struct KramaOracleSummary {
  size_t permutations;
  size_t executable;
  size_t theorem_valid;
  size_t derivable;
  size_t discrepancies;
} KramaOracleSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *krama_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *krama_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string produced by this library that has not
 * been freed yet.
 */
void krama_string_free(char *s);

/**
 * Parses plan text into a new handle stored in `*out`. On a parse error
 * the message carries `line:column`; `line` and `column` receive the
 * position when non-null.
 *
 * # Safety
 * `text` must be a NUL-terminated string; the other pointers must be
 * null or writable.
 */
enum KramaStatus krama_plan_parse(const char *text,
                                  struct KramaPlan **out,
                                  size_t *line,
                                  size_t *column);

/**
 * Releases a plan. Null is ignored.
 *
 * # Safety
 * `plan` must be null or a handle from `krama_plan_parse` that has not
 * been freed yet.
 */
void krama_plan_free(struct KramaPlan *plan);

/**
 * Canonical text of the plan.
 *
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum KramaStatus krama_plan_format(const struct KramaPlan *plan, char **out);

/**
 * The formula of the plan's composition, rendered with ASCII or Unicode
 * connectives.
 *
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum KramaStatus krama_plan_sequence(const struct KramaPlan *plan, bool unicode, char **out);

/**
 * Checks the dependencies along the plan's order. Returns `Ok` for a
 * valid sequence and `Invalid` otherwise.
 *
 * # Safety
 * `plan` must be a live handle.
 */
enum KramaStatus krama_plan_validate(const struct KramaPlan *plan, enum KramaDeps deps);

/**
 * Evaluates the plan's composition from its initial world.
 *
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum KramaStatus krama_plan_eval(const struct KramaPlan *plan, enum KramaEval *out);

/**
 * Derives the plan's order and stores the proof text in `*out`. Returns
 * `Invalid` with a null `*out` when no derivation exists.
 *
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum KramaStatus krama_plan_derive(const struct KramaPlan *plan, enum KramaDeps deps, char **out);

/**
 * Runs every ordering of the plan (up to `bound` instructions) and fills
 * `*out`. Returns `Invalid` when any ordering shows a discrepancy.
 *
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum KramaStatus krama_plan_oracle(const struct KramaPlan *plan,
                                   enum KramaDeps deps,
                                   size_t bound,
                                   struct KramaOracleSummary *out);

/**
 * Runs the command-line tool in process with JSON output. `argv` holds
 * the arguments after the program name. The JSON document goes to
 * `*out` (or clap's message for a usage error) and the process exit code to `*exit_code`.
 *
 * # Safety
 * `argv` must point to `argc` NUL-terminated strings; `out` and
 * `exit_code` must be writable.
 */
enum KramaStatus krama_run_json(const char *const *argv, size_t argc, char **out, int *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KRAMA_H */

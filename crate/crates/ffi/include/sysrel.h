#ifndef SYSREL_H
#define SYSREL_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum SysrelStatus {
  SYSREL_STATUS_OK = 0,
  SYSREL_STATUS_NULL_POINTER = 1,
  SYSREL_STATUS_INVALID_UTF8 = 2,
  SYSREL_STATUS_CONFIG = 3,
  SYSREL_STATUS_INVALID_ARGUMENT = 4,
  SYSREL_STATUS_SYNTAX = 5,
  SYSREL_STATUS_NUMERICAL = 6,
  SYSREL_STATUS_IO = 7,
  SYSREL_STATUS_UNSUPPORTED = 8,
  SYSREL_STATUS_OUT_OF_RANGE = 9,
  SYSREL_STATUS_PANIC = 10,
} SysrelStatus;

/**
 * Parsed composition function `h(g1, …, gm)`.
 */
typedef struct SysrelComposition SysrelComposition;

/**
 * Parsed analysis configuration.
 */
typedef struct SysrelConfig SysrelConfig;

/**
 * Result of an analysis together with its configuration echo.
 */
typedef struct SysrelReport SysrelReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into the library from this thread.
 */
const char *sysrel_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sysrel_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void sysrel_string_free(char *s);

/**
 * Parses a JSON configuration.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum SysrelStatus sysrel_config_from_json(const char *json, struct SysrelConfig **out);

/**
 * Reads a JSON configuration file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum SysrelStatus sysrel_config_load(const char *path, struct SysrelConfig **out);

/**
 * Replaces every seed of the configuration by the split of `seed`.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SysrelStatus sysrel_config_set_seed(struct SysrelConfig *cfg, uint64_t seed);

/**
 * Checks the configuration; the error message names the offending field.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SysrelStatus sysrel_config_validate(const struct SysrelConfig *cfg);

/**
 * Serialises the configuration to JSON.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum SysrelStatus sysrel_config_to_json(const struct SysrelConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must come from this library and must not be used afterwards. NULL is ignored.
 */
void sysrel_config_free(struct SysrelConfig *cfg);

/**
 * Runs the active-learning analysis.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum SysrelStatus sysrel_run(const struct SysrelConfig *cfg, struct SysrelReport **out);

/**
 * Subset simulation on the true limit states, averaged over `repeats` runs.
 * Any of the output pointers may be NULL.
 *
 * # Safety
 * `cfg` must be a live handle; non-NULL outputs must be writable.
 */
enum SysrelStatus sysrel_reference(const struct SysrelConfig *cfg,
                                   size_t repeats,
                                   double *pf,
                                   double *beta,
                                   double *cov);

/**
 * Scalar results of a run. Any of the output pointers may be NULL.
 *
 * # Safety
 * `report` must be a live handle; non-NULL outputs must be writable.
 */
enum SysrelStatus sysrel_report_summary(const struct SysrelReport *report,
                                        double *pf,
                                        double *beta,
                                        bool *converged,
                                        size_t *total_evaluations);

/**
 * Number of components of the analysed system.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SysrelStatus sysrel_report_n_components(const struct SysrelReport *report, size_t *out);

/**
 * True limit-state evaluations and enrichments of component `j` (0-based).
 *
 * # Safety
 * `report` must be a live handle; non-NULL outputs must be writable.
 */
enum SysrelStatus sysrel_report_component(const struct SysrelReport *report,
                                          size_t j,
                                          size_t *evaluations,
                                          size_t *enrichments);

/**
 * Full report, including the configuration echo, as JSON.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SysrelStatus sysrel_report_to_json(const struct SysrelReport *report, char **out);

/**
 * Iteration history as CSV.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum SysrelStatus sysrel_report_history_csv(const struct SysrelReport *report, char **out);

/**
 * # Safety
 * `report` must come from this library and must not be used afterwards. NULL is ignored.
 */
void sysrel_report_free(struct SysrelReport *report);

/**
 * Parses a composition such as `"min(g1, max(g2, g3))"`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum SysrelStatus sysrel_composition_parse(const char *text, struct SysrelComposition **out);

/**
 * Number of components `m` the composition refers to.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum SysrelStatus sysrel_composition_n_components(const struct SysrelComposition *h, size_t *out);

/**
 * Evaluates the composition at `z[0..n]`; `n` must be at least `m`.
 *
 * # Safety
 * `h` must be a live handle, `z` must point to `n` doubles and `out` must be writable.
 */
enum SysrelStatus sysrel_composition_eval(const struct SysrelComposition *h,
                                          const double *z,
                                          size_t n,
                                          double *out);

/**
 * Canonical text of the composition.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum SysrelStatus sysrel_composition_to_string(const struct SysrelComposition *h, char **out);

/**
 * # Safety
 * `h` must come from this library and must not be used afterwards. NULL is ignored.
 */
void sysrel_composition_free(struct SysrelComposition *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYSREL_H */

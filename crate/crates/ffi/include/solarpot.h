#ifndef SOLARPOT_H
#define SOLARPOT_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible entry point.
 */
typedef enum SpStatus {
  /**
   * Success.
   */
  SP_STATUS_OK = 0,
  /**
   * A pointer argument was null.
   */
  SP_STATUS_NULL_POINTER = 1,
  /**
   * Invalid argument or configuration.
   */
  SP_STATUS_ARGUMENT = 2,
  /**
   * File could not be read or written.
   */
  SP_STATUS_IO = 3,
  /**
   * Input file failed to parse or validate.
   */
  SP_STATUS_FORMAT = 4,
  /**
   * The pipeline run itself failed.
   */
  SP_STATUS_RUN = 5,
} SpStatus;

/**
 * Opaque run configuration handle.
 */
typedef struct SpConfig SpConfig;

/**
 * Opaque report handle produced by [`sp_run`].
 */
typedef struct SpReport SpReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sp_version(void);

/**
 * Message for the most recent failure on this thread, or null after a
 * success. The pointer stays valid until the next call on the same thread.
 */
const char *sp_last_error(void);

/**
 * Load a run configuration from a JSON file into a new handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum SpStatus sp_config_load(const char *path, struct SpConfig **out);

/**
 * Release a configuration handle. Null is accepted.
 *
 * # Safety
 * `cfg` must come from [`sp_config_load`] and not be freed twice.
 */
void sp_config_free(struct SpConfig *cfg);

/**
 * Execute the full pipeline for `cfg`. Writes the report and summary files
 * named by the configuration and returns the report as a handle.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum SpStatus sp_run(const struct SpConfig *cfg, struct SpReport **out);

/**
 * Release a report handle. Null is accepted.
 *
 * # Safety
 * `report` must come from [`sp_run`] and not be freed twice.
 */
void sp_report_free(struct SpReport *report);

/**
 * Total annual potential (kWh/year) over all successful sections.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum SpStatus sp_report_total_potential(const struct SpReport *report, double *out);

/**
 * Number of successfully processed sections.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum SpStatus sp_report_section_count(const struct SpReport *report, uintptr_t *out);

/**
 * Number of per-section error records.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum SpStatus sp_report_error_count(const struct SpReport *report, uintptr_t *out);

/**
 * Fraction of sections that failed, in [0, 1].
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum SpStatus sp_report_error_fraction(const struct SpReport *report, double *out);

/**
 * Serialize the full report to a JSON string; free it with
 * [`sp_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum SpStatus sp_report_to_json(const struct SpReport *report, char **out);

/**
 * Release a string returned by this library. Null is accepted.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void sp_string_free(char *s);

/**
 * solar potential (kWh/year) = n_modules * power_wp/1000 * pvout.
 * All inputs must be non-negative.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SpStatus sp_potential_kwh_per_year(double n_modules,
                                        double power_wp,
                                        double pvout_kwh_per_kwp,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOLARPOT_H */

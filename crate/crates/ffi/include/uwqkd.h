#ifndef UWQKD_H
#define UWQKD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values 2, 3 and 4 match the command-line exit codes.
 */
typedef enum UwqkdStatus {
  UWQKD_STATUS_OK = 0,
  UWQKD_STATUS_NULL_POINTER = 1,
  UWQKD_STATUS_CONFIG = 2,
  UWQKD_STATUS_IO = 3,
  UWQKD_STATUS_NUMERIC = 4,
  UWQKD_STATUS_INVALID_UTF8 = 5,
  UWQKD_STATUS_OUT_OF_RANGE = 6,
  UWQKD_STATUS_PANIC = 7,
} UwqkdStatus;

/**
 * Opaque arrival set produced by a campaign or loaded from disk.
 */
typedef struct UwqkdArrivals UwqkdArrivals;

/**
 * Opaque link configuration.
 */
typedef struct UwqkdConfig UwqkdConfig;

/**
 * Opaque gate sweep result.
 */
typedef struct UwqkdSweep UwqkdSweep;

typedef struct UwqkdRecord {
  double hit_x;
  double hit_y;
  double delay;
  double aoa;
  double weight;
} UwqkdRecord;

typedef struct UwqkdSelection {
  /**
   * Seconds.
   */
  double bit_period_raw;
  double bit_period_rounded;
  /**
   * Radians.
   */
  double fov_raw;
  double fov_rounded;
} UwqkdSelection;

typedef struct UwqkdSweepPoint {
  double gate;
  double gamma;
  double background;
  double noise;
  double qber;
} UwqkdSweepPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The
 * pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *uwqkd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *uwqkd_version(void);

/**
 * Default link configuration. Never NULL.
 */
struct UwqkdConfig *uwqkd_config_default(void);

/**
 * Parse `key = value` configuration text.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum UwqkdStatus uwqkd_config_parse(const char *text, struct UwqkdConfig **out_cfg);

/**
 * Read a configuration file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum UwqkdStatus uwqkd_config_load(const char *path, struct UwqkdConfig **out_cfg);

/**
 * Set one key using the configuration text syntax. On failure the
 * configuration is left unchanged.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be valid
 * NUL-terminated strings.
 */
enum UwqkdStatus uwqkd_config_set(struct UwqkdConfig *cfg, const char *key, const char *value);

/**
 * Canonical configuration text. Free with [`uwqkd_string_free`].
 *
 * # Safety
 * `cfg` must come from this library.
 */
char *uwqkd_config_to_text(const struct UwqkdConfig *cfg);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void uwqkd_string_free(char *s);

/**
 * # Safety
 * `cfg` must be NULL or a configuration from this library, not yet freed.
 */
void uwqkd_config_free(struct UwqkdConfig *cfg);

/**
 * Run the photon campaign described by `cfg`.
 *
 * # Safety
 * `cfg` must come from this library and `out` must be a valid pointer.
 */
enum UwqkdStatus uwqkd_simulate(const struct UwqkdConfig *cfg, struct UwqkdArrivals **out_set);

/**
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum UwqkdStatus uwqkd_arrivals_load(const char *path, struct UwqkdArrivals **out_set);

/**
 * # Safety
 * `set` must come from this library; `path` must be a valid string.
 */
enum UwqkdStatus uwqkd_arrivals_save(const struct UwqkdArrivals *set, const char *path);

/**
 * Number of arrival records; 0 for a NULL handle.
 *
 * # Safety
 * `set` must be NULL or come from this library.
 */
size_t uwqkd_arrivals_len(const struct UwqkdArrivals *set);

/**
 * Photons launched in the campaign; 0 for a NULL handle.
 *
 * # Safety
 * `set` must be NULL or come from this library.
 */
uint64_t uwqkd_arrivals_photons(const struct UwqkdArrivals *set);

/**
 * # Safety
 * `set` must come from this library and `rec` must be a valid pointer.
 */
enum UwqkdStatus uwqkd_arrivals_record(const struct UwqkdArrivals *set,
                                       size_t index,
                                       struct UwqkdRecord *rec);

/**
 * # Safety
 * `set` must be NULL or an arrival set from this library, not yet freed.
 */
void uwqkd_arrivals_free(struct UwqkdArrivals *set);

/**
 * Bit period and FoV at quantile `level`, using the weighting stored in
 * the set's configuration.
 *
 * # Safety
 * `set` must come from this library and `sel` must be a valid pointer.
 */
enum UwqkdStatus uwqkd_select(const struct UwqkdArrivals *set,
                              double level,
                              struct UwqkdSelection *sel);

/**
 * Received fraction for FoV half-angle `fov` (rad) and gate `gate` (s).
 *
 * # Safety
 * `set` must come from this library and `value` must be a valid pointer.
 */
enum UwqkdStatus uwqkd_gamma(const struct UwqkdArrivals *set,
                             double fov,
                             double gate,
                             double *value);

/**
 * QBER for received fraction `gamma`, mean photons per pulse `n_s` and
 * per-detector noise `n_noise`.
 *
 * # Safety
 * `value` must be a valid pointer.
 */
enum UwqkdStatus uwqkd_qber(double gamma, double n_s, double n_noise, double *value);

/**
 * Sweep the gate over `grid` (seconds, `grid_len` entries) for the given
 * bit period (s) and FoV (rad). A NULL grid or zero length selects the
 * default grid.
 *
 * # Safety
 * `set` must come from this library; `grid` must point to `grid_len`
 * doubles when non-NULL; `out` must be a valid pointer.
 */
enum UwqkdStatus uwqkd_optimize(const struct UwqkdArrivals *set,
                                double bit_period,
                                double fov,
                                const double *grid,
                                size_t grid_len,
                                struct UwqkdSweep **out_sweep);

/**
 * Number of grid points in a sweep; 0 for a NULL handle.
 *
 * # Safety
 * `sweep` must be NULL or come from this library.
 */
size_t uwqkd_sweep_len(const struct UwqkdSweep *sweep);

/**
 * # Safety
 * `sweep` must come from this library and `point` must be a valid pointer.
 */
enum UwqkdStatus uwqkd_sweep_point(const struct UwqkdSweep *sweep,
                                   size_t index,
                                   struct UwqkdSweepPoint *point);

/**
 * # Safety
 * `sweep` must come from this library and `point` must be a valid pointer.
 */
enum UwqkdStatus uwqkd_sweep_optimum(const struct UwqkdSweep *sweep, struct UwqkdSweepPoint *point);

/**
 * # Safety
 * `sweep` must be NULL or a sweep from this library, not yet freed.
 */
void uwqkd_sweep_free(struct UwqkdSweep *sweep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UWQKD_H */

#ifndef POINTNLS_H
#define POINTNLS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PnStatus {
  PN_STATUS_OK = 0,
  PN_STATUS_NULL_POINTER = 1,
  PN_STATUS_INVALID_PARAMETER = 2,
  PN_STATUS_DOMAIN = 3,
  PN_STATUS_GUARD = 4,
  PN_STATUS_CONVERGENCE = 5,
  PN_STATUS_CONFIG = 6,
  PN_STATUS_IO = 7,
  PN_STATUS_OUT_OF_RANGE = 8,
  PN_STATUS_PANIC = 9,
} PnStatus;

typedef struct PnCharge PnCharge;

typedef struct PnConfig PnConfig;

typedef struct PnReport PnReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success. Owned by the library,
// valid until the next call on the same thread.
const char *pn_last_error(void);

// Library version, static string.
const char *pn_version(void);

// Default configuration.
enum PnStatus pn_config_default(struct PnConfig **out);

// Parses a configuration from TOML (`json == 0`) or JSON text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum PnStatus pn_config_parse(const char *text, int32_t json, struct PnConfig **out);

// Reads a configuration file; `.json` is JSON, anything else TOML.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PnStatus pn_config_load(const char *path, struct PnConfig **out);

// # Safety
// `cfg` must come from a `pn_config_*` constructor, or be null.
void pn_config_free(struct PnConfig *cfg);

// Solves the point-interaction charge equation on the configured time grid.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum PnStatus pn_limit_solve(const struct PnConfig *cfg, struct PnCharge **out);

// Solves the smeared-interaction charge equation at `eps` on the configured time grid.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum PnStatus pn_scaled_solve(const struct PnConfig *cfg, double eps, struct PnCharge **out);

// Number of nodes (time steps + 1).
//
// # Safety
// `h` must be a live handle or null (gives 0).
size_t pn_charge_len(const struct PnCharge *h);

// Node `i`: time and charge.
//
// # Safety
// `h` must be a live handle; the out pointers must be writable.
enum PnStatus pn_charge_get(const struct PnCharge *h, size_t i, double *t, double *re, double *im);

// Largest residual of the discrete equation the charge was solved from.
//
// # Safety
// `h` must be a live handle or null (gives NaN).
double pn_charge_residual(const struct PnCharge *h);

// # Safety
// `h` must come from a solve call, or be null.
void pn_charge_free(struct PnCharge *h);

// Runs the eps sweep of the configuration.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum PnStatus pn_converge(const struct PnConfig *cfg, struct PnReport **out);

// Fitted sup-error rate and its R^2; NaN when the sweep was partial.
//
// # Safety
// `h` must be a live handle; the out pointers must be writable.
enum PnStatus pn_report_rate(const struct PnReport *h, double *slope, double *r_squared);

// The report as JSON. Release with `pn_string_free`.
//
// # Safety
// `h` must be a live handle; `out` must be writable.
enum PnStatus pn_report_json(const struct PnReport *h, char **out);

// # Safety
// `h` must come from `pn_converge`, or be null.
void pn_report_free(struct PnReport *h);

// # Safety
// `s` must come from this library, or be null.
void pn_string_free(char *s);

// Memory kernel (rho_eps, U(t) rho_eps) of the configured form factor.
//
// # Safety
// `cfg` must be a live handle; the out pointers must be writable.
enum PnStatus pn_memory_kernel(const struct PnConfig *cfg,
                               double eps,
                               double t,
                               double *re,
                               double *im);

// Runs the quick invariant checks. Returns Ok only if all pass.
//
// # Safety
// Out pointers may be null.
enum PnStatus pn_selftest(size_t *passed, size_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POINTNLS_H */

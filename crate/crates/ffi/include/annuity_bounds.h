#ifndef ANNUITY_BOUNDS_H
#define ANNUITY_BOUNDS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AbStatus {
  AB_STATUS_OK = 0,
  AB_STATUS_NULL_POINTER = 1,
  AB_STATUS_INVALID_ARGUMENT = 2,
  AB_STATUS_LIFE_TABLE = 3,
  AB_STATUS_NUMERICAL = 4,
  AB_STATUS_IO = 5,
  AB_STATUS_PANIC = 6,
} AbStatus;

typedef enum AbFaa {
  AB_FAA_UDD = 0,
  AB_FAA_CFM = 1,
  AB_FAA_BALDUCCI = 2,
} AbFaa;

typedef enum AbProduct {
  AB_PRODUCT_GMAB = 0,
  AB_PRODUCT_GMIB = 1,
  AB_PRODUCT_GMDB = 2,
  AB_PRODUCT_COMBINED = 3,
} AbProduct;

typedef enum AbConstraints {
  AB_CONSTRAINTS_FULL = 0,
  AB_CONSTRAINTS_TERMINAL_ONLY = 1,
} AbConstraints;

typedef struct AbLifeTable AbLifeTable;

typedef struct AbMarket AbMarket;

// Hull-White market, forward curve `b + c e^{-at} + d a t e^{-at}`, and fund mix.
typedef struct AbMarketParams {
  double kappa;
  double sigma_r;
  double sigma_s;
  double rho;
  double r0;
  double curve_a;
  double curve_b;
  double curve_c;
  double curve_d;
  double a0;
  double pi_s;
  double pi_p;
} AbMarketParams;

typedef struct AbContract {
  enum AbProduct product;
  double rg;
  int64_t age;
  double maturity;
} AbContract;

typedef struct AbStrictResult {
  double lower;
  double upper;
  // 0 when the death-benefit formulas were evaluated outside their sufficient conditions.
  int32_t assumptions_hold;
} AbStrictResult;

typedef struct AbRelaxedResult {
  double lower;
  double upper;
  double residual_max;
  uint32_t iterations;
} AbRelaxedResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, static storage.
const char *ab_version(void);

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *ab_last_error(void);

// Parses an `age,lx` CSV.
//
// # Safety
// `csv` must be a NUL-terminated string and `out` a valid pointer.
enum AbStatus ab_life_table_from_csv(const char *csv, struct AbLifeTable **out);

// Synthetic table with Makeham hazard `a + b c^x`.
//
// # Safety
// `out` must be a valid pointer.
enum AbStatus ab_life_table_makeham(double a,
                                    double b,
                                    double c,
                                    int64_t base_age,
                                    uint32_t span,
                                    double l0,
                                    struct AbLifeTable **out);

// # Safety
// `table` must come from this library and not be used afterwards. Null is ignored.
void ab_life_table_free(struct AbLifeTable *table);

// `t`-year survival of a life aged `age` under a fractional-age assumption.
//
// # Safety
// `table` must be a live handle and `out` a valid pointer.
enum AbStatus ab_survival(const struct AbLifeTable *table,
                          int64_t age,
                          enum AbFaa kind,
                          double t,
                          double *out);

// # Safety
// `params` and `out` must be valid pointers.
enum AbStatus ab_market_new(const struct AbMarketParams *params, struct AbMarket **out);

// # Safety
// `market` must come from this library and not be used afterwards. Null is ignored.
void ab_market_free(struct AbMarket *market);

// Time-0 price under one fractional-age assumption.
//
// # Safety
// Handles must be live; `contract` and `out` valid pointers.
enum AbStatus ab_faa_price(const struct AbMarket *market,
                           const struct AbLifeTable *table,
                           const struct AbContract *contract,
                           enum AbFaa kind,
                           double *out);

// Bounds over every intensity matching the table at integer ages.
//
// # Safety
// Handles must be live; `contract` and `out` valid pointers.
enum AbStatus ab_strict_bounds(const struct AbMarket *market,
                               const struct AbLifeTable *table,
                               const struct AbContract *contract,
                               struct AbStrictResult *out);

// Bounds over the hazard band `[(μ - δ)+, μ + δ]` around the `kind` baseline,
// in the flat-rate market at `r0`. Needs an integer maturity.
//
// # Safety
// Handles must be live; `contract` and `out` valid pointers.
enum AbStatus ab_relaxed_bounds(const struct AbMarket *market,
                                const struct AbLifeTable *table,
                                const struct AbContract *contract,
                                enum AbFaa kind,
                                double delta,
                                enum AbConstraints constraints,
                                struct AbRelaxedResult *out);

// Runs a JSON run configuration and returns the CSV the command-line tool
// would write. `base_dir` resolves relative paths and may be null.
// Free the result with `ab_string_free`.
//
// # Safety
// `json` must be NUL-terminated, `base_dir` null or NUL-terminated, `out` valid.
enum AbStatus ab_run_config(const char *json, const char *base_dir, char **out);

// # Safety
// `s` must come from this library. Null is ignored.
void ab_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANNUITY_BOUNDS_H */

#ifndef HEMSKIT_H
#define HEMSKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HemskitStatus {
  HEMSKIT_STATUS_OK = 0,
  HEMSKIT_STATUS_NULL_POINTER = 1,
  HEMSKIT_STATUS_INVALID_ARGUMENT = 2,
  HEMSKIT_STATUS_LENGTH_MISMATCH = 3,
  HEMSKIT_STATUS_NOT_CONVERGED = 4,
  HEMSKIT_STATUS_SCHEMA = 5,
  HEMSKIT_STATUS_INFEASIBLE = 6,
  HEMSKIT_STATUS_IO = 7,
  /**
   * A panic was caught at the boundary.
   */
  HEMSKIT_STATUS_INTERNAL = 99,
} HemskitStatus;

/**
 * SVDD flexibility surrogate.
 */
typedef struct HemskitSvdd HemskitSvdd;

/**
 * Fitted VAR-LASSO model.
 */
typedef struct HemskitVarModel HemskitVarModel;

/**
 * Virtual-battery flexibility surrogate.
 */
typedef struct HemskitVirtualBattery HemskitVirtualBattery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *hemskit_last_error(void);

/**
 * Fits a VAR(`p`) by centralized ADMM. `data` is `n_series × length`
 * row-major, one row per series.
 *
 * # Safety
 * `data` must point to `n_series * length` doubles and `out` to writable
 * storage for a handle.
 */
enum HemskitStatus hemskit_var_fit(const double *data,
                                   size_t n_series,
                                   size_t length,
                                   size_t p,
                                   double lambda,
                                   double rho,
                                   size_t max_iter,
                                   double tol,
                                   struct HemskitVarModel **out);

/**
 * Number of series and lag order.
 *
 * # Safety
 * `model` must be a live handle; `n_series` and `p` writable.
 */
enum HemskitStatus hemskit_var_dims(const struct HemskitVarModel *model,
                                    size_t *n_series,
                                    size_t *p);

/**
 * Copies the `n × n·p` coefficient matrix row-major into `out`.
 *
 * # Safety
 * `out` must hold `out_len` doubles.
 */
enum HemskitStatus hemskit_var_coefficients(const struct HemskitVarModel *model,
                                            double *out,
                                            size_t out_len);

/**
 * Iterated forecasts from the last `n_recent ≥ p` observations
 * (`n_series × n_recent`, row-major, oldest first). Writes
 * `n_series × steps` row-major into `out`.
 *
 * # Safety
 * Pointers must cover the stated dimensions.
 */
enum HemskitStatus hemskit_var_forecast(const struct HemskitVarModel *model,
                                        const double *recent,
                                        size_t n_recent,
                                        size_t steps,
                                        double *out);

/**
 * # Safety
 * `model` must come from `hemskit_var_fit` and not be used afterwards.
 */
void hemskit_var_free(struct HemskitVarModel *model);

/**
 * Fits the virtual battery to `k` trajectories of `horizon` deviations
 * (row-major).
 *
 * # Safety
 * `trajectories` must hold `k * horizon` doubles.
 */
enum HemskitStatus hemskit_vbattery_fit(const double *trajectories,
                                        size_t k,
                                        size_t horizon,
                                        double soc_ini,
                                        double dt_h,
                                        struct HemskitVirtualBattery **out);

/**
 * Sets `*feasible` to whether the trajectory lies inside the battery.
 *
 * # Safety
 * `trajectory` must hold `horizon` doubles.
 */
enum HemskitStatus hemskit_vbattery_classify(const struct HemskitVirtualBattery *vb,
                                             const double *trajectory,
                                             size_t horizon,
                                             bool *feasible);

/**
 * Sum of the SOC and power ranges over the horizon.
 *
 * # Safety
 * `size` must be writable.
 */
enum HemskitStatus hemskit_vbattery_size(const struct HemskitVirtualBattery *vb, double *size);

/**
 * # Safety
 * `vb` must come from `hemskit_vbattery_fit` and not be used afterwards.
 */
void hemskit_vbattery_free(struct HemskitVirtualBattery *vb);

/**
 * Fits an SVDD with a sigmoid kernel to `k` points of dimension `dim`.
 *
 * # Safety
 * `points` must hold `k * dim` doubles.
 */
enum HemskitStatus hemskit_svdd_fit(const double *points,
                                    size_t k,
                                    size_t dim,
                                    double nu,
                                    double gamma,
                                    double coef0,
                                    struct HemskitSvdd **out);

/**
 * Loads an SVDD surrogate from its JSON exchange form.
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
enum HemskitStatus hemskit_svdd_from_json(const char *json, struct HemskitSvdd **out);

/**
 * Squared kernel distance of `x` to the sphere centre.
 *
 * # Safety
 * `x` must hold `dim` doubles.
 */
enum HemskitStatus hemskit_svdd_radius2(const struct HemskitSvdd *model,
                                        const double *x,
                                        size_t dim,
                                        double *radius2);

/**
 * # Safety
 * `x` must hold `dim` doubles and `feasible` be writable.
 */
enum HemskitStatus hemskit_svdd_classify(const struct HemskitSvdd *model,
                                         const double *x,
                                         size_t dim,
                                         bool *feasible);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void hemskit_svdd_free(struct HemskitSvdd *model);

/**
 * # Safety
 * `pred` and `obs` must hold `n` doubles; `out` must be writable.
 */
enum HemskitStatus hemskit_mae(const double *pred, const double *obs, size_t n, double *out);

/**
 * # Safety
 * As for [`hemskit_mae`].
 */
enum HemskitStatus hemskit_rmse(const double *pred, const double *obs, size_t n, double *out);

/**
 * Quantile-based CRPS. `quantiles` is `n × n_levels` row-major; `levels`
 * must be the uniform grid `1/(Q+1), …, Q/(Q+1)`.
 *
 * # Safety
 * Pointers must cover the stated dimensions.
 */
enum HemskitStatus hemskit_crps(const double *levels,
                                size_t n_levels,
                                const double *quantiles,
                                const double *obs,
                                size_t n,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEMSKIT_H */

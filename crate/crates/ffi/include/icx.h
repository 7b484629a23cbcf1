#ifndef ICX_H
#define ICX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IcxStatus {
  ICX_STATUS_OK = 0,
  ICX_STATUS_NULL_POINTER = 1,
  // Unparsable spec, invalid UTF-8 or a wrongly sized buffer.
  ICX_STATUS_INVALID_ARGUMENT = 2,
  ICX_STATUS_DOMAIN = 3,
  // Degenerate data: zero variance, all-zero path, overflow.
  ICX_STATUS_DEGENERATE = 4,
  // Quadrature or root finding failed to reach its tolerance.
  ICX_STATUS_NUMERIC = 5,
  ICX_STATUS_IO = 6,
  ICX_STATUS_PANIC = 7,
} IcxStatus;

typedef enum IcxEstimator {
  ICX_ESTIMATOR_OLS = 0,
  ICX_ESTIMATOR_INDIRECT_INFERENCE = 1,
} IcxEstimator;

// Opaque binding-function table.
typedef struct IcxBindingTable IcxBindingTable;

// Opaque Monte Carlo report.
typedef struct IcxReport IcxReport;

typedef struct IcxFit {
  double rho_hat;
  double sigma2_k0;
  double sigma2_k1;
  size_t n;
  // Non-zero when `h^-1` was clamped at the bottom of the table.
  int saturated;
} IcxFit;

typedef struct IcxSelection {
  double ic0;
  double ic1;
  uint8_t k_hat;
} IcxSelection;

typedef struct IcxLimitEstimate {
  double probability;
  // Monte Carlo standard error; 0 for closed forms.
  double se;
  size_t draws;
  size_t saturated;
} IcxLimitEstimate;

typedef struct IcxCellResult {
  size_t n;
  // 0 for OLS, 1 for indirect inference.
  int estimator;
  double freq;
  size_t reps;
  size_t correct;
  size_t excluded;
  size_t saturated;
  uint64_t seed;
} IcxCellResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *icx_last_error(void);

// Library version as a static NUL-terminated string.
const char *icx_version(void);

// # Safety
// `out` must be a valid pointer.
enum IcxStatus icx_h_of(double c, double *out);

// # Safety
// `out` must be a valid pointer.
enum IcxStatus icx_g_of(double c, double *out);

// Builds the default table by quadrature. Free with [`icx_binding_free`].
//
// # Safety
// `out` must be a valid pointer.
enum IcxStatus icx_binding_build(struct IcxBindingTable **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum IcxStatus icx_binding_load(const char *path, struct IcxBindingTable **out);

// # Safety
// `table` must come from this library; `path` must be NUL-terminated.
enum IcxStatus icx_binding_save(const struct IcxBindingTable *table, const char *path);

// # Safety
// `table` must come from this library and not be used afterwards. NULL is ignored.
void icx_binding_free(struct IcxBindingTable *table);

// Solves `h(c) = x`. `saturated` (may be NULL) is set to 1 when `x` lies
// below the table and `c` was clamped.
//
// # Safety
// `table` must come from this library; `c_out` must be valid.
enum IcxStatus icx_h_inverse(const struct IcxBindingTable *table,
                             double x,
                             double *c_out,
                             int *saturated);

// # Safety
// `model` must be NUL-terminated; `out` must be valid.
enum IcxStatus icx_rho_n(const char *model, size_t n, double *out);

// Simulates `X_0..X_n` into `buf`, which must hold exactly `n + 1` values.
// `error` and `init` may be NULL for N(0,1) errors and `X_0 = 0`.
//
// # Safety
// String arguments must be NUL-terminated; `buf` must hold `buf_len` doubles.
enum IcxStatus icx_gen_path(const char *model,
                            const char *error,
                            const char *init,
                            size_t n,
                            uint64_t seed,
                            double *buf,
                            size_t buf_len);

// OLS on a raw path of `len >= 2` values.
//
// # Safety
// `values` must hold `len` doubles; `out` must be valid.
enum IcxStatus icx_ols_fit(const double *values, size_t len, struct IcxFit *out);

// # Safety
// `values` must hold `len` doubles; `table` must come from this library.
enum IcxStatus icx_indirect_fit(const double *values,
                                size_t len,
                                const struct IcxBindingTable *table,
                                struct IcxFit *out);

// IC_0, IC_1 and the selected order. `table` is required for indirect
// inference and ignored for OLS.
//
// # Safety
// `values` must hold `len` doubles; `criterion` must be NUL-terminated.
enum IcxStatus icx_select(const double *values,
                          size_t len,
                          enum IcxEstimator estimator,
                          const char *criterion,
                          const struct IcxBindingTable *table,
                          struct IcxSelection *out);

// # Safety
// `criterion` must be NUL-terminated; `out` must be valid.
enum IcxStatus icx_penalty(const char *criterion, size_t n, double *out);

// `p_n / rho_n^{2n}` for an explosive-side model.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be valid.
enum IcxStatus icx_penalty_ratio(const char *model, const char *criterion, size_t n, double *out);

// # Safety
// `out` must be valid.
enum IcxStatus icx_chi2_cdf(double x, double *out);

// Asymptotic probability of correct selection. `theorem` is one of
// `t1 t2a t2b t2c t3 t4a t4b t4c p5`; `branch` is `aic` or `divergent`
// (NULL means `aic`); `tau` is `0`, a positive number or `inf` (NULL means
// `0`). `table` is needed for `t3` and `t4a`; NULL builds one.
//
// # Safety
// String arguments must be NUL-terminated or NULL where allowed.
enum IcxStatus icx_limit_probability(const char *theorem,
                                     const char *branch,
                                     double pi,
                                     double omega2,
                                     double c,
                                     double rho,
                                     const char *tau,
                                     size_t draws,
                                     size_t steps,
                                     uint64_t seed,
                                     const struct IcxBindingTable *table,
                                     struct IcxLimitEstimate *out);

// Runs an experiment described by TOML text. `reps` and `workers` override
// the config when non-zero. Free the report with [`icx_report_free`].
//
// # Safety
// `config_toml` must be NUL-terminated; `out` must be valid.
enum IcxStatus icx_experiment_run(const char *config_toml,
                                  size_t reps,
                                  size_t workers,
                                  const struct IcxBindingTable *table,
                                  struct IcxReport **out);

// Number of cells in a report (0 for NULL).
//
// # Safety
// `report` must come from this library or be NULL.
size_t icx_report_len(const struct IcxReport *report);

// # Safety
// `report` must come from this library; `out` must be valid.
enum IcxStatus icx_report_cell(const struct IcxReport *report,
                               size_t index,
                               struct IcxCellResult *out);

// Writes the report atomically as CSV, or JSON when `json` is non-zero.
//
// # Safety
// `report` must come from this library; `path` must be NUL-terminated.
enum IcxStatus icx_report_write(const struct IcxReport *report, const char *path, int json);

// # Safety
// `report` must come from this library and not be used afterwards. NULL is ignored.
void icx_report_free(struct IcxReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICX_H */

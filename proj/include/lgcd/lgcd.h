#ifndef LGCD_LGCD_H
#define LGCD_LGCD_H

#include <stddef.h>
#include <stdint.h>

#if defined(LGCD_BUILDING_LIBRARY)
#define LGCD_API __attribute__((visibility("default")))
#else
#define LGCD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/*
 * Locally Gaussian conditional density estimation.
 *
 * Every fallible call returns an lgcd_status; on failure the message is
 * available from lgcd_last_error() on the calling thread until the next call.
 * Objects handed out through an out-pointer are owned by the caller and
 * released with the matching *_free function. Pointers returned by accessors
 * stay valid as long as the owning object.
 */

typedef enum lgcd_status {
    LGCD_OK = 0,
    LGCD_ERR_VALIDATION = 1,
    LGCD_ERR_NUMERIC = 2,
    LGCD_ERR_IO = 3,
    LGCD_ERR_UNSUPPORTED = 4,
    LGCD_ERR_CONTRACT = 5
} lgcd_status;

typedef struct lgcd_dataset lgcd_dataset;
typedef struct lgcd_plan lgcd_plan;
typedef struct lgcd_model lgcd_model;
typedef struct lgcd_density lgcd_density;
typedef struct lgcd_curve lgcd_curve;
typedef struct lgcd_report lgcd_report;

LGCD_API const char* lgcd_version(void);
LGCD_API const char* lgcd_last_error(void);
/* 0 selects the number of hardware threads. */
LGCD_API void lgcd_set_threads(size_t threads);
LGCD_API size_t lgcd_get_threads(void);

/* ---- datasets ---- */

/* values is row-major n x p; names may be NULL for X1..Xp. */
LGCD_API lgcd_status lgcd_dataset_create(const double* values, size_t n, size_t p, const char* const* names,
                                         lgcd_dataset** out);
LGCD_API lgcd_status lgcd_dataset_load_csv(const char* path, lgcd_dataset** out);
LGCD_API lgcd_status lgcd_dataset_parse_csv(const char* text, lgcd_dataset** out);
LGCD_API lgcd_status lgcd_dataset_write_csv(const lgcd_dataset* ds, const char* path);
/* Caller frees the returned text with lgcd_string_free. */
LGCD_API lgcd_status lgcd_dataset_to_csv(const lgcd_dataset* ds, char** out);
LGCD_API size_t lgcd_dataset_rows(const lgcd_dataset* ds);
LGCD_API size_t lgcd_dataset_cols(const lgcd_dataset* ds);
LGCD_API const char* lgcd_dataset_name(const lgcd_dataset* ds, size_t col);
LGCD_API lgcd_status lgcd_dataset_value(const lgcd_dataset* ds, size_t row, size_t col, double* out);
LGCD_API lgcd_status lgcd_dataset_index_of(const lgcd_dataset* ds, const char* name, size_t* out);
LGCD_API void lgcd_dataset_free(lgcd_dataset* ds);
LGCD_API void lgcd_string_free(char* s);

/* Pseudo-observations Phi^-1(midrank / (n + 1)), column names kept. */
LGCD_API lgcd_status lgcd_pseudo_transform(const lgcd_dataset* ds, lgcd_dataset** out);

/* ---- bandwidths ---- */

/* use_cv != 0 runs leave-one-out likelihood cross-validation for every pair;
 * otherwise every pair gets fixed_h. */
LGCD_API lgcd_status lgcd_plan_select(const lgcd_dataset* ds, int use_cv, double fixed_h, lgcd_plan** out);
LGCD_API size_t lgcd_plan_pair_count(const lgcd_plan* plan);
LGCD_API lgcd_status lgcd_plan_pair(const lgcd_plan* plan, size_t index, size_t* i, size_t* j, double* h);
LGCD_API lgcd_status lgcd_plan_get(const lgcd_plan* plan, size_t i, size_t j, double* h);
LGCD_API void lgcd_plan_free(lgcd_plan* plan);

/* ---- conditional density ---- */

LGCD_API lgcd_status lgcd_model_create(const lgcd_dataset* ds, const size_t* response, size_t k,
                                       const size_t* conditioning, size_t m, const lgcd_plan* plan,
                                       lgcd_model** out);
/* grid_size 0 picks the default (2000 points for one response, 100 per axis for two). */
LGCD_API lgcd_status lgcd_model_estimate(const lgcd_model* model, const double* x2, size_t m, size_t grid_size,
                                         lgcd_density** out);
/* Explicit response axes: axes[r] holds axis_sizes[r] increasing points. */
LGCD_API lgcd_status lgcd_model_estimate_on(const lgcd_model* model, const double* x2, size_t m,
                                            const double* const* axes, const size_t* axis_sizes, size_t k,
                                            lgcd_density** out);
/* Local correlation of dataset columns i and j at pseudo point (zi, zj). */
LGCD_API lgcd_status lgcd_model_local_rho(const lgcd_model* model, size_t i, size_t j, double zi, double zj,
                                          double* out);
LGCD_API void lgcd_model_free(lgcd_model* model);

LGCD_API size_t lgcd_density_dims(const lgcd_density* d);
LGCD_API size_t lgcd_density_axis_size(const lgcd_density* d, size_t axis);
LGCD_API const double* lgcd_density_axis(const lgcd_density* d, size_t axis);
/* Row-major values, last axis fastest. */
LGCD_API size_t lgcd_density_size(const lgcd_density* d);
LGCD_API const double* lgcd_density_values(const lgcd_density* d);
LGCD_API double lgcd_density_normalizer(const lgcd_density* d);
LGCD_API double lgcd_density_psd_repaired_fraction(const lgcd_density* d);
/* Grid points left at zero because no data lay near them. */
LGCD_API size_t lgcd_density_no_local_mass(const lgcd_density* d);
LGCD_API lgcd_status lgcd_density_quantile(const lgcd_density* d, double alpha, double* value, int* extrapolated);
LGCD_API void lgcd_density_free(lgcd_density* d);

/* ---- simulation ---- */

typedef enum lgcd_family {
    LGCD_GAUSSIAN_COPULA = 0,
    LGCD_JOE_COPULA = 1,
    LGCD_T_COPULA = 2,
    LGCD_MULTIVARIATE_T = 3,
    LGCD_LOGNORMAL_T10_PLUS_INDEP_T5 = 4,
    LGCD_NONLINEAR_AR1 = 5
} lgcd_family;

typedef enum lgcd_margin { LGCD_STD_NORMAL = 0, LGCD_STD_EXPONENTIAL = 1, LGCD_LOGNORMAL = 2 } lgcd_margin;

typedef enum lgcd_method { LGCD_METHOD_LGDE = 0, LGCD_METHOD_NAIVE = 1 } lgcd_method;

typedef struct lgcd_sim_spec {
    int family;
    int margin;
    size_t dim;
    size_t n;
    uint64_t seed;
    double theta;
    double rho;
    double dof;
    double rho2;
    double ar;
    double ar_sqrt;
} lgcd_sim_spec;

LGCD_API void lgcd_sim_spec_default(lgcd_sim_spec* spec);
LGCD_API lgcd_status lgcd_family_from_name(const char* name, int* out);
LGCD_API lgcd_status lgcd_margin_from_name(const char* name, int* out);
LGCD_API lgcd_status lgcd_method_from_name(const char* name, int* out);
LGCD_API const char* lgcd_family_name(int family);
LGCD_API const char* lgcd_margin_name(int margin);
LGCD_API const char* lgcd_method_name(int method);

LGCD_API lgcd_status lgcd_simulate(const lgcd_sim_spec* spec, lgcd_dataset** out);
/* out receives `points` values. */
LGCD_API lgcd_status lgcd_truth_grid(const lgcd_sim_spec* spec, size_t points, double* out);
LGCD_API lgcd_status lgcd_true_conditional(const lgcd_sim_spec* spec, const double* x2, size_t m, const double* grid,
                                           size_t points, double* out);
/* per_replicate receives `replicates` values. */
LGCD_API lgcd_status lgcd_ise_bench(const lgcd_sim_spec* spec, const double* x2, size_t m, size_t replicates,
                                    size_t grid_points, int method, double* per_replicate, double* mean_ise);
LGCD_API lgcd_status lgcd_kendall_tau(const double* x, const double* y, size_t n, double* out);

/* ---- partial local covariance ---- */

LGCD_API lgcd_status lgcd_partial_cov(const double* series, size_t n, size_t lag, const size_t* given_lags,
                                      const double* x_cond, size_t n_given, size_t diag_points, int use_cv,
                                      double fixed_h, lgcd_curve** out);
LGCD_API size_t lgcd_curve_size(const lgcd_curve* c);
LGCD_API const double* lgcd_curve_z(const lgcd_curve* c);
LGCD_API const double* lgcd_curve_points(const lgcd_curve* c);
LGCD_API const double* lgcd_curve_unconditional(const lgcd_curve* c);
LGCD_API const double* lgcd_curve_conditional(const lgcd_curve* c);
LGCD_API void lgcd_curve_free(lgcd_curve* c);

/* ---- VaR backtest ---- */

typedef struct lgcd_backtest_options {
    size_t warmup;
    const double* levels;
    size_t n_levels;
    /* 0 freezes the bandwidths chosen on the first day; r > 0 reselects every r days. */
    size_t period;
    /* 0 keeps an expanding window. */
    size_t window;
    size_t grid_points;
    int use_cv;
    double fixed_h;
} lgcd_backtest_options;

LGCD_API void lgcd_backtest_options_default(lgcd_backtest_options* options);
/* Column 0 of returns is the portfolio, the rest are components. */
LGCD_API lgcd_status lgcd_var_backtest(const lgcd_dataset* returns, const lgcd_backtest_options* options,
                                       lgcd_report** out);
LGCD_API size_t lgcd_report_levels(const lgcd_report* r);
LGCD_API double lgcd_report_level(const lgcd_report* r, size_t l);
LGCD_API double lgcd_report_proportion(const lgcd_report* r, size_t l);
LGCD_API size_t lgcd_report_n_eval(const lgcd_report* r);
LGCD_API size_t lgcd_report_skipped(const lgcd_report* r);
LGCD_API size_t lgcd_report_days(const lgcd_report* r);
LGCD_API lgcd_status lgcd_report_day(const lgcd_report* r, size_t index, size_t* day, int* skipped, double* realized);
LGCD_API lgcd_status lgcd_report_day_var(const lgcd_report* r, size_t index, size_t level, double* var,
                                         int* exceeded);
LGCD_API void lgcd_report_free(lgcd_report* r);

#ifdef __cplusplus
}
#endif

#endif

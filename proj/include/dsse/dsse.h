#ifndef DSSE_DSSE_H
#define DSSE_DSSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DSSE_BUILDING)
#    define DSSE_API __declspec(dllexport)
#  else
#    define DSSE_API __declspec(dllimport)
#  endif
#else
#  define DSSE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dsse_status {
  DSSE_OK = 0,
  DSSE_ERR_INVALID_ARGUMENT = 1,
  DSSE_ERR_IO = 2,
  DSSE_ERR_NUMERICAL = 3,
  DSSE_ERR_INTERNAL = 4
} dsse_status;

typedef struct dsse_feeder dsse_feeder;
typedef struct dsse_linear_model dsse_linear_model;
typedef struct dsse_profile dsse_profile;
typedef struct dsse_dataset dsse_dataset;
typedef struct dsse_estimate dsse_estimate;
typedef struct dsse_benchmark dsse_benchmark;

DSSE_API const char* dsse_version(void);

/* Message of the last failed call on this thread; "" when there is none. */
DSSE_API const char* dsse_last_error(void);

DSSE_API const char* dsse_status_name(dsse_status status);

/* Feeder model */

DSSE_API dsse_status dsse_feeder_load(const char* path, dsse_feeder** out);
DSSE_API dsse_status dsse_feeder_synthetic(size_t phases, uint64_t seed, dsse_feeder** out);
DSSE_API dsse_status dsse_feeder_save(const dsse_feeder* feeder, const char* path);
/* Phases excluding (resp. including) the three slack phases. */
DSSE_API size_t dsse_feeder_phase_count(const dsse_feeder* feeder);
DSSE_API size_t dsse_feeder_total_phase_count(const dsse_feeder* feeder);
DSSE_API void dsse_feeder_free(dsse_feeder* feeder);

DSSE_API dsse_status dsse_linearize(const dsse_feeder* feeder, dsse_linear_model** out);
DSSE_API dsse_status dsse_linear_model_export(const dsse_linear_model* model,
                                              const dsse_feeder* feeder, const char* dir);
DSSE_API dsse_status dsse_linear_model_import(const char* dir, dsse_linear_model** out);
DSSE_API size_t dsse_linear_model_phase_count(const dsse_linear_model* model);
DSSE_API void dsse_linear_model_free(dsse_linear_model* model);

/* Load profiles */

typedef struct dsse_profile_options {
  size_t steps;          /* default 3 */
  size_t start_minute;   /* default 720 */
  uint64_t seed;         /* default 7 */
  double solar_share;    /* default 0.3 */
  double load_variability;  /* default 0.01 */
  double min_voltage;    /* default 0.95 */
} dsse_profile_options;

DSSE_API void dsse_profile_options_default(dsse_profile_options* options);
DSSE_API dsse_status dsse_profile_load(const char* path, dsse_profile** out);
DSSE_API dsse_status dsse_profile_synthetic(const dsse_feeder* feeder,
                                            const dsse_profile_options* options,
                                            dsse_profile** out);
DSSE_API dsse_status dsse_profile_save(const dsse_profile* profile, const char* path);
DSSE_API size_t dsse_profile_steps(const dsse_profile* profile);
DSSE_API void dsse_profile_free(dsse_profile* profile);

/* Measurement datasets */

typedef enum dsse_mask_policy {
  DSSE_MASK_MEASUREMENT_ROWS = 0, /* |v|, P, Q rows only */
  DSSE_MASK_ALL_ENTRIES = 1
} dsse_mask_policy;

typedef struct dsse_generate_options {
  size_t steps;       /* T; the last T steps of the profile. default 1 */
  double fraction;    /* default 0.5 */
  double noise_std;   /* relative, default 0.01 */
  uint64_t seed;      /* default 2024 */
  dsse_mask_policy mask_policy;
} dsse_generate_options;

DSSE_API void dsse_generate_options_default(dsse_generate_options* options);
DSSE_API dsse_status dsse_generate(const dsse_feeder* feeder, const dsse_profile* profile,
                                   const dsse_generate_options* options, dsse_dataset** out);
DSSE_API dsse_status dsse_dataset_write(const dsse_dataset* dataset, const char* dir);
DSSE_API dsse_status dsse_dataset_read(const char* dir, dsse_dataset** out);
DSSE_API size_t dsse_dataset_rows(const dsse_dataset* dataset);
DSSE_API size_t dsse_dataset_cols(const dsse_dataset* dataset);
DSSE_API size_t dsse_dataset_steps(const dsse_dataset* dataset);
DSSE_API size_t dsse_dataset_known_count(const dsse_dataset* dataset);
DSSE_API int dsse_dataset_has_truth(const dsse_dataset* dataset);
/* spectrum.csv of the noiseless matrix, or of the masked one without truth. */
DSSE_API dsse_status dsse_dataset_write_spectrum(const dsse_dataset* dataset, const char* path);
/* Normalized singular values; *count receives the full length. */
DSSE_API dsse_status dsse_dataset_spectrum(const dsse_dataset* dataset, double* values,
                                           size_t capacity, size_t* count);
DSSE_API void dsse_dataset_free(dsse_dataset* dataset);

/* Estimation */

typedef enum dsse_method {
  DSSE_METHOD_DIRECT = 0,
  DSSE_METHOD_CG = 1
} dsse_method;

typedef struct dsse_estimator_options {
  size_t rank;            /* default 4 */
  double mu;              /* default 100 */
  double nu;              /* default 10 */
  size_t max_iterations;  /* default 100 */
  double tolerance;       /* default 1e-6 */
  int early_stop;         /* default 1 */
  dsse_method method;
  size_t cg_threshold;    /* default 6000 */
} dsse_estimator_options;

DSSE_API void dsse_estimator_options_default(dsse_estimator_options* options);
DSSE_API dsse_status dsse_estimate_run(const dsse_dataset* dataset,
                                       const dsse_linear_model* model,
                                       const dsse_estimator_options* options,
                                       dsse_estimate** out);
/* estimate.json, plus errors.csv when the dataset carries truth. */
DSSE_API dsse_status dsse_estimate_write(const dsse_estimate* estimate,
                                         const dsse_dataset* dataset, const char* dir);
DSSE_API dsse_status dsse_estimate_write_trace(const dsse_estimate* estimate, const char* path);
DSSE_API size_t dsse_estimate_iterations(const dsse_estimate* estimate);
DSSE_API int dsse_estimate_converged(const dsse_estimate* estimate);
DSSE_API double dsse_estimate_final_objective(const dsse_estimate* estimate);
DSSE_API double dsse_estimate_seconds(const dsse_estimate* estimate);
/* Row-major T x n arrays of |v| (p.u.) and angle (degrees). */
DSSE_API dsse_status dsse_estimate_state(const dsse_estimate* estimate, double* magnitude,
                                         double* angle_deg, size_t capacity);
/* Fails with DSSE_ERR_INVALID_ARGUMENT when the dataset has no truth. */
DSSE_API dsse_status dsse_estimate_metrics(const dsse_estimate* estimate,
                                           const dsse_dataset* dataset, double* mape_pct,
                                           double* mae_deg);
DSSE_API void dsse_estimate_free(dsse_estimate* estimate);

/* Monte Carlo benchmark */

typedef struct dsse_benchmark_options {
  const char* feeder_path;   /* NULL: synthetic feeder */
  const char* profile_path;  /* NULL: synthetic profile */
  size_t synthetic_phases;   /* default 260 */
  uint64_t synthetic_seed;   /* default 123 */
  const size_t* steps;       /* NULL: {1, 3} */
  size_t steps_count;
  const double* fractions;   /* NULL: {0.1, 0.3, 0.5, 0.7} */
  size_t fractions_count;
  double noise_std;          /* default 0.01 */
  size_t runs;               /* default 50 */
  dsse_estimator_options estimator;
  int baseline_svt;          /* default 0 */
  size_t svt_steps;          /* default 300 */
  uint64_t master_seed;      /* default 2024 */
  size_t threads;            /* 0: DSSE_THREADS or the hardware count */
} dsse_benchmark_options;

typedef struct dsse_cell_summary {
  int baseline;  /* 0: alternating minimization, 1: SVT */
  size_t cell;
  size_t steps;
  double fraction;
  size_t runs;
  size_t succeeded;
  double mape_mean;
  double mape_std;
  double mae_mean;
  double mae_std;
} dsse_cell_summary;

DSSE_API void dsse_benchmark_options_default(dsse_benchmark_options* options);
/* Runs the sweep and, when out_dir is not NULL, writes its outputs there. */
DSSE_API dsse_status dsse_benchmark_run(const dsse_benchmark_options* options,
                                        const char* out_dir, dsse_benchmark** out);
DSSE_API size_t dsse_benchmark_summary_count(const dsse_benchmark* benchmark);
DSSE_API dsse_status dsse_benchmark_summary(const dsse_benchmark* benchmark, size_t index,
                                            dsse_cell_summary* out);
DSSE_API size_t dsse_benchmark_failed_cells(const dsse_benchmark* benchmark);
DSSE_API double dsse_benchmark_seconds(const dsse_benchmark* benchmark);
DSSE_API void dsse_benchmark_free(dsse_benchmark* benchmark);

#ifdef __cplusplus
}
#endif

#endif

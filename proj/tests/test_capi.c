#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "dsse/dsse.h"

static int failures = 0;

#define CHECK(cond)                                                        \
  do {                                                                     \
    if (!(cond)) {                                                         \
      fprintf(stderr, "%s:%d: CHECK(%s) failed; last error: %s\n", __FILE__, \
              __LINE__, #cond, dsse_last_error());                         \
      ++failures;                                                          \
    }                                                                      \
  } while (0)

static char* join(const char* dir, const char* name) {
  size_t len = strlen(dir) + strlen(name) + 2;
  char* p = (char*)malloc(len);
  snprintf(p, len, "%s/%s", dir, name);
  return p;
}

int main(int argc, char** argv) {
  const char* out = argc > 1 ? argv[1] : "capi_out";
  char* data_dir = join(out, "data");
  char* est_dir = join(out, "estimate");
  char* lin_dir = join(out, "linear");
  char* bench_dir = join(out, "bench");
  char* feeder_path = join(out, "feeder.json");

  CHECK(strcmp(dsse_version(), "0.1.0") == 0);
  CHECK(strcmp(dsse_status_name(DSSE_ERR_IO), "") != 0);

  /* errors */
  dsse_feeder* bad = NULL;
  CHECK(dsse_feeder_load("/nonexistent/feeder.json", &bad) == DSSE_ERR_IO);
  CHECK(bad == NULL);
  CHECK(strlen(dsse_last_error()) > 0);
  CHECK(dsse_feeder_load(NULL, &bad) == DSSE_ERR_INVALID_ARGUMENT);
  CHECK(dsse_feeder_synthetic(0, 1, &bad) == DSSE_ERR_INVALID_ARGUMENT);

  /* fixture feeder */
  dsse_feeder* fixture = NULL;
  CHECK(dsse_feeder_load(DSSE_DATA_DIR "/feeder123.json", &fixture) == DSSE_OK);
  CHECK(strlen(dsse_last_error()) == 0);
  CHECK(dsse_feeder_phase_count(fixture) == 260);
  CHECK(dsse_feeder_total_phase_count(fixture) == 263);
  dsse_feeder_free(fixture);

  /* synthetic pipeline */
  dsse_feeder* feeder = NULL;
  CHECK(dsse_feeder_synthetic(60, 5, &feeder) == DSSE_OK);
  CHECK(dsse_feeder_phase_count(feeder) == 60);
  CHECK(dsse_feeder_save(feeder, feeder_path) == DSSE_OK);

  dsse_profile_options popt;
  dsse_profile_options_default(&popt);
  CHECK(popt.steps == 3);
  dsse_profile* profile = NULL;
  CHECK(dsse_profile_synthetic(feeder, &popt, &profile) == DSSE_OK);
  CHECK(dsse_profile_steps(profile) == 3);

  dsse_generate_options gopt;
  dsse_generate_options_default(&gopt);
  CHECK(gopt.steps == 1);
  CHECK(gopt.fraction == 0.5);
  gopt.steps = 2;
  dsse_dataset* dataset = NULL;
  CHECK(dsse_generate(feeder, profile, &gopt, &dataset) == DSSE_OK);
  CHECK(dsse_dataset_rows(dataset) == 10);
  CHECK(dsse_dataset_cols(dataset) == 60);
  CHECK(dsse_dataset_steps(dataset) == 2);
  CHECK(dsse_dataset_known_count(dataset) == 180);
  CHECK(dsse_dataset_has_truth(dataset));
  gopt.steps = 4;
  dsse_dataset* too_long = NULL;
  CHECK(dsse_generate(feeder, profile, &gopt, &too_long) == DSSE_ERR_INVALID_ARGUMENT);

  size_t count = 0;
  CHECK(dsse_dataset_spectrum(dataset, NULL, 0, &count) == DSSE_OK);
  CHECK(count == 10);
  double spectrum[10];
  CHECK(dsse_dataset_spectrum(dataset, spectrum, 10, &count) == DSSE_OK);
  double sum = 0;
  for (size_t i = 0; i < count; ++i) sum += spectrum[i];
  CHECK(fabs(sum - 1.0) < 1e-12);

  CHECK(dsse_dataset_write(dataset, data_dir) == DSSE_OK);
  dsse_dataset* reread = NULL;
  CHECK(dsse_dataset_read(data_dir, &reread) == DSSE_OK);
  CHECK(dsse_dataset_known_count(reread) == 180);

  dsse_linear_model* model = NULL;
  CHECK(dsse_linearize(feeder, &model) == DSSE_OK);
  CHECK(dsse_linear_model_phase_count(model) == 60);
  CHECK(dsse_linear_model_export(model, feeder, lin_dir) == DSSE_OK);
  dsse_linear_model* imported = NULL;
  CHECK(dsse_linear_model_import(lin_dir, &imported) == DSSE_OK);
  CHECK(dsse_linear_model_phase_count(imported) == 60);

  dsse_estimator_options eopt;
  dsse_estimator_options_default(&eopt);
  CHECK(eopt.rank == 4);
  CHECK(eopt.mu == 100.0);
  CHECK(eopt.nu == 10.0);
  eopt.max_iterations = 30;
  dsse_estimate* estimate = NULL;
  CHECK(dsse_estimate_run(reread, imported, &eopt, &estimate) == DSSE_OK);
  CHECK(dsse_estimate_iterations(estimate) > 0);
  CHECK(dsse_estimate_iterations(estimate) <= 30);
  CHECK(isfinite(dsse_estimate_final_objective(estimate)));
  double mape = -1, mae = -1;
  CHECK(dsse_estimate_metrics(estimate, reread, &mape, &mae) == DSSE_OK);
  CHECK(mape >= 0 && mape < 100);
  CHECK(mae >= 0 && mae < 180);
  double mag[120], ang[120];
  CHECK(dsse_estimate_state(estimate, mag, ang, 120) == DSSE_OK);
  CHECK(dsse_estimate_state(estimate, mag, ang, 10) == DSSE_ERR_INVALID_ARGUMENT);
  CHECK(mag[0] > 0.5 && mag[0] < 1.5);
  CHECK(dsse_estimate_write(estimate, reread, est_dir) == DSSE_OK);

  eopt.rank = 0;
  dsse_estimate* rejected = NULL;
  CHECK(dsse_estimate_run(reread, imported, &eopt, &rejected) == DSSE_ERR_INVALID_ARGUMENT);

  /* benchmark */
  dsse_benchmark_options bopt;
  dsse_benchmark_options_default(&bopt);
  CHECK(bopt.runs == 50);
  size_t steps[] = {1};
  double fractions[] = {0.5};
  bopt.feeder_path = feeder_path;
  bopt.steps = steps;
  bopt.steps_count = 1;
  bopt.fractions = fractions;
  bopt.fractions_count = 1;
  bopt.runs = 2;
  bopt.estimator.max_iterations = 10;
  bopt.baseline_svt = 1;
  bopt.svt_steps = 10;
  bopt.threads = 1;
  dsse_benchmark* bench = NULL;
  CHECK(dsse_benchmark_run(&bopt, bench_dir, &bench) == DSSE_OK);
  CHECK(dsse_benchmark_summary_count(bench) == 2);
  CHECK(dsse_benchmark_failed_cells(bench) == 0);
  dsse_cell_summary s;
  CHECK(dsse_benchmark_summary(bench, 0, &s) == DSSE_OK);
  CHECK(s.baseline == 0);
  CHECK(s.steps == 1);
  CHECK(s.runs == 2);
  CHECK(s.succeeded == 2);
  CHECK(dsse_benchmark_summary(bench, 1, &s) == DSSE_OK);
  CHECK(s.baseline == 1);
  CHECK(dsse_benchmark_summary(bench, 2, &s) == DSSE_ERR_INVALID_ARGUMENT);

  dsse_benchmark_free(bench);
  dsse_estimate_free(estimate);
  dsse_linear_model_free(imported);
  dsse_linear_model_free(model);
  dsse_dataset_free(reread);
  dsse_dataset_free(dataset);
  dsse_profile_free(profile);
  dsse_feeder_free(feeder);
  dsse_feeder_free(NULL);

  free(data_dir);
  free(est_dir);
  free(lin_dir);
  free(bench_dir);
  free(feeder_path);
  if (failures) fprintf(stderr, "%d check(s) failed\n", failures);
  else printf("all C API checks passed\n");
  return failures ? 1 : 0;
}

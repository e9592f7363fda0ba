#include "dsse/dsse.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "dsse/error.hpp"
#include "dsse/estimator.hpp"
#include "dsse/feeder.hpp"
#include "dsse/harness.hpp"
#include "dsse/io.hpp"
#include "dsse/measurement.hpp"
#include "dsse/metrics.hpp"
#include "dsse/rng.hpp"
#include "dsse/synthetic.hpp"
#include "dsse/version.hpp"

struct dsse_feeder {
  dsse::Feeder feeder;
};

struct dsse_linear_model {
  dsse::LinearPowerFlowModel model;
};

struct dsse_profile {
  dsse::LoadProfile profile;
};

struct dsse_dataset {
  dsse::MeasurementDataset data;
};

struct dsse_estimate {
  dsse::EstimateResult result;
};

struct dsse_benchmark {
  dsse::ScenarioResult result;
};

namespace {

thread_local std::string g_last_error;

dsse_status fail(dsse_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <class F>
dsse_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return DSSE_OK;
  } catch (const dsse::InvalidArgument& e) {
    return fail(DSSE_ERR_INVALID_ARGUMENT, e.what());
  } catch (const dsse::IoError& e) {
    return fail(DSSE_ERR_IO, e.what());
  } catch (const dsse::NumericalError& e) {
    return fail(DSSE_ERR_NUMERICAL, e.what());
  } catch (const dsse::Error& e) {
    return fail(DSSE_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DSSE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DSSE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DSSE_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw dsse::InvalidArgument(std::string(what) + " must not be null");
}

dsse::EstimatorConfig to_config(const dsse_estimator_options* o) {
  dsse::EstimatorConfig c;
  if (!o) return c;
  c.rank = o->rank;
  c.mu = o->mu;
  c.nu = o->nu;
  c.max_iterations = o->max_iterations;
  c.tolerance = o->tolerance;
  c.early_stop = o->early_stop != 0;
  switch (o->method) {
    case DSSE_METHOD_DIRECT: c.method = dsse::SubproblemMethod::kDirect; break;
    case DSSE_METHOD_CG: c.method = dsse::SubproblemMethod::kConjugateGradient; break;
    default: throw dsse::InvalidArgument("unknown subproblem method");
  }
  c.cg_threshold = o->cg_threshold;
  return c;
}

dsse::MaskPolicy to_policy(dsse_mask_policy p) {
  switch (p) {
    case DSSE_MASK_MEASUREMENT_ROWS: return dsse::MaskPolicy::kMeasurementRows;
    case DSSE_MASK_ALL_ENTRIES: return dsse::MaskPolicy::kAllEntries;
  }
  throw dsse::InvalidArgument("unknown mask policy");
}

}  // namespace

extern "C" {

const char* dsse_version(void) { return dsse::kVersion; }

const char* dsse_last_error(void) { return g_last_error.c_str(); }

const char* dsse_status_name(dsse_status status) {
  switch (status) {
    case DSSE_OK: return "ok";
    case DSSE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DSSE_ERR_IO: return "i/o error";
    case DSSE_ERR_NUMERICAL: return "numerical failure";
    case DSSE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

dsse_status dsse_feeder_load(const char* path, dsse_feeder** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new dsse_feeder{dsse::load_feeder(path)};
  });
}

dsse_status dsse_feeder_synthetic(size_t phases, uint64_t seed, dsse_feeder** out) {
  return guarded([&] {
    require(out, "out");
    dsse::SyntheticFeederSpec spec;
    spec.phases = phases;
    spec.seed = seed;
    *out = new dsse_feeder{dsse::make_synthetic_feeder(spec)};
  });
}

dsse_status dsse_feeder_save(const dsse_feeder* feeder, const char* path) {
  return guarded([&] {
    require(feeder, "feeder");
    require(path, "path");
    dsse::save_feeder(feeder->feeder, path);
  });
}

size_t dsse_feeder_phase_count(const dsse_feeder* feeder) {
  return feeder ? feeder->feeder.phase_count() : 0;
}

size_t dsse_feeder_total_phase_count(const dsse_feeder* feeder) {
  return feeder ? feeder->feeder.total_phase_count() : 0;
}

void dsse_feeder_free(dsse_feeder* feeder) { delete feeder; }

dsse_status dsse_linearize(const dsse_feeder* feeder, dsse_linear_model** out) {
  return guarded([&] {
    require(feeder, "feeder");
    require(out, "out");
    const auto adm = dsse::assemble_admittance(feeder->feeder);
    *out = new dsse_linear_model{dsse::linearize_power_flow(adm, feeder->feeder.slack_voltage)};
  });
}

dsse_status dsse_linear_model_export(const dsse_linear_model* model, const dsse_feeder* feeder,
                                     const char* dir) {
  return guarded([&] {
    require(model, "model");
    require(dir, "dir");
    const std::size_t total =
        feeder ? feeder->feeder.total_phase_count() : model->model.ordering.size() + 3;
    dsse::export_linear_model(model->model, dir, total);
  });
}

dsse_status dsse_linear_model_import(const char* dir, dsse_linear_model** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new dsse_linear_model{dsse::import_linear_model(dir)};
  });
}

size_t dsse_linear_model_phase_count(const dsse_linear_model* model) {
  return model ? model->model.ordering.size() : 0;
}

void dsse_linear_model_free(dsse_linear_model* model) { delete model; }

void dsse_profile_options_default(dsse_profile_options* options) {
  if (!options) return;
  const dsse::SyntheticProfileSpec spec;
  options->steps = spec.steps;
  options->start_minute = spec.start_minute;
  options->seed = spec.seed;
  options->solar_share = spec.solar_share;
  options->load_variability = spec.load_variability;
  options->min_voltage = spec.min_voltage;
}

dsse_status dsse_profile_load(const char* path, dsse_profile** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new dsse_profile{dsse::load_profile(path)};
  });
}

dsse_status dsse_profile_synthetic(const dsse_feeder* feeder, const dsse_profile_options* options,
                                   dsse_profile** out) {
  return guarded([&] {
    require(feeder, "feeder");
    require(out, "out");
    dsse::SyntheticProfileSpec spec;
    if (options) {
      spec.steps = options->steps;
      spec.start_minute = options->start_minute;
      spec.seed = options->seed;
      spec.solar_share = options->solar_share;
      spec.load_variability = options->load_variability;
      spec.min_voltage = options->min_voltage;
    }
    *out = new dsse_profile{dsse::make_synthetic_profile(feeder->feeder, spec)};
  });
}

dsse_status dsse_profile_save(const dsse_profile* profile, const char* path) {
  return guarded([&] {
    require(profile, "profile");
    require(path, "path");
    dsse::save_profile(profile->profile, path);
  });
}

size_t dsse_profile_steps(const dsse_profile* profile) {
  return profile ? profile->profile.steps() : 0;
}

void dsse_profile_free(dsse_profile* profile) { delete profile; }

void dsse_generate_options_default(dsse_generate_options* options) {
  if (!options) return;
  options->steps = 1;
  options->fraction = 0.5;
  options->noise_std = 0.01;
  options->seed = 2024;
  options->mask_policy = DSSE_MASK_MEASUREMENT_ROWS;
}

dsse_status dsse_generate(const dsse_feeder* feeder, const dsse_profile* profile,
                          const dsse_generate_options* options, dsse_dataset** out) {
  return guarded([&] {
    require(feeder, "feeder");
    require(profile, "profile");
    require(out, "out");
    dsse_generate_options o;
    dsse_generate_options_default(&o);
    if (options) o = *options;
    const auto& prof = profile->profile;
    if (o.steps == 0 || o.steps > prof.steps()) {
      throw dsse::InvalidArgument("T = " + std::to_string(o.steps) + " does not fit the " +
                                  std::to_string(prof.steps()) + "-step profile");
    }
    const auto adm = dsse::assemble_admittance(feeder->feeder);
    const auto series = dsse::simulate_timeseries(adm, feeder->feeder.slack_voltage,
                                                  prof.window(prof.steps() - o.steps, o.steps));
    auto ds = std::make_unique<dsse_dataset>();
    ds->data.phases = series.phases;
    ds->data.truth = dsse::build_measurement_matrix(series);
    ds->data.mask = dsse::apply_observation_mask(ds->data.truth, o.fraction,
                                                 dsse::mask_seed(o.seed, 0, 0),
                                                 to_policy(o.mask_policy));
    ds->data.noise = {o.noise_std, dsse::noise_seed(o.seed, 0, 0)};
    const auto noisy = dsse::inject_noise(ds->data.truth, ds->data.mask, ds->data.noise);
    ds->data.observed.steps = noisy.steps;
    ds->data.observed.values = dsse::project_observed(noisy.values, ds->data.mask);
    *out = ds.release();
  });
}

dsse_status dsse_dataset_write(const dsse_dataset* dataset, const char* dir) {
  return guarded([&] {
    require(dataset, "dataset");
    require(dir, "dir");
    dsse::write_dataset(dataset->data, dir);
  });
}

dsse_status dsse_dataset_read(const char* dir, dsse_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new dsse_dataset{dsse::read_dataset(dir)};
  });
}

size_t dsse_dataset_rows(const dsse_dataset* dataset) {
  return dataset ? dataset->data.observed.rows() : 0;
}

size_t dsse_dataset_cols(const dsse_dataset* dataset) {
  return dataset ? dataset->data.observed.cols() : 0;
}

size_t dsse_dataset_steps(const dsse_dataset* dataset) {
  return dataset ? dataset->data.observed.steps : 0;
}

size_t dsse_dataset_known_count(const dsse_dataset* dataset) {
  return dataset ? dataset->data.mask.size() : 0;
}

int dsse_dataset_has_truth(const dsse_dataset* dataset) {
  return dataset && dataset->data.has_truth() ? 1 : 0;
}

namespace {

dsse::SingularValueSpectrum dataset_spectrum(const dsse_dataset* dataset) {
  const auto& d = dataset->data;
  return dsse::singular_value_spectrum(d.has_truth() ? d.truth.values : d.observed.values);
}

}  // namespace

dsse_status dsse_dataset_write_spectrum(const dsse_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(path, "path");
    dsse::write_spectrum_csv({{dataset->data.observed.steps, dataset_spectrum(dataset)}}, path);
  });
}

dsse_status dsse_dataset_spectrum(const dsse_dataset* dataset, double* values, size_t capacity,
                                  size_t* count) {
  return guarded([&] {
    require(dataset, "dataset");
    const auto spec = dataset_spectrum(dataset);
    const auto len = static_cast<std::size_t>(spec.normalized.size());
    if (count) *count = len;
    if (values) std::copy_n(spec.normalized.data(), std::min(len, capacity), values);
  });
}

void dsse_dataset_free(dsse_dataset* dataset) { delete dataset; }

void dsse_estimator_options_default(dsse_estimator_options* options) {
  if (!options) return;
  const dsse::EstimatorConfig c;
  options->rank = c.rank;
  options->mu = c.mu;
  options->nu = c.nu;
  options->max_iterations = c.max_iterations;
  options->tolerance = c.tolerance;
  options->early_stop = c.early_stop ? 1 : 0;
  options->method = DSSE_METHOD_DIRECT;
  options->cg_threshold = c.cg_threshold;
}

dsse_status dsse_estimate_run(const dsse_dataset* dataset, const dsse_linear_model* model,
                              const dsse_estimator_options* options, dsse_estimate** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(model, "model");
    require(out, "out");
    const auto& d = dataset->data;
    if (model->model.ordering != d.phases) {
      throw dsse::InvalidArgument("linear model phases do not match the dataset columns");
    }
    const dsse::StackedLinearModel stacked(model->model, d.observed.steps);
    *out = new dsse_estimate{
        dsse::run_alternating_minimization(d.observed, d.mask, stacked, to_config(options))};
  });
}

dsse_status dsse_estimate_write(const dsse_estimate* estimate, const dsse_dataset* dataset,
                                const char* dir) {
  return guarded([&] {
    require(estimate, "estimate");
    require(dataset, "dataset");
    require(dir, "dir");
    dsse::write_estimate(estimate->result, dataset->data, dir);
  });
}

dsse_status dsse_estimate_write_trace(const dsse_estimate* estimate, const char* path) {
  return guarded([&] {
    require(estimate, "estimate");
    require(path, "path");
    dsse::write_trace_csv(estimate->result.trace, path);
  });
}

size_t dsse_estimate_iterations(const dsse_estimate* estimate) {
  return estimate ? estimate->result.trace.iterations.size() : 0;
}

int dsse_estimate_converged(const dsse_estimate* estimate) {
  return estimate && estimate->result.converged ? 1 : 0;
}

double dsse_estimate_final_objective(const dsse_estimate* estimate) {
  if (!estimate) return 0.0;
  const auto& tr = estimate->result.trace;
  return tr.iterations.empty() ? tr.initial_objective : tr.iterations.back().objective;
}

double dsse_estimate_seconds(const dsse_estimate* estimate) {
  return estimate ? estimate->result.seconds : 0.0;
}

dsse_status dsse_estimate_state(const dsse_estimate* estimate, double* magnitude,
                                double* angle_deg, size_t capacity) {
  return guarded([&] {
    require(estimate, "estimate");
    const auto& s = estimate->result.state;
    const auto size = static_cast<std::size_t>(s.magnitude.size());
    if (capacity < size) {
      throw dsse::InvalidArgument("buffer holds " + std::to_string(capacity) + " values, need " +
                                  std::to_string(size));
    }
    const auto t = s.magnitude.rows();
    const auto n = s.magnitude.cols();
    for (Eigen::Index i = 0; i < t; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto k = static_cast<std::size_t>(i * n + j);
        if (magnitude) magnitude[k] = s.magnitude(i, j);
        if (angle_deg) angle_deg[k] = s.angle_deg(i, j);
      }
    }
  });
}

dsse_status dsse_estimate_metrics(const dsse_estimate* estimate, const dsse_dataset* dataset,
                                  double* mape_pct, double* mae_deg) {
  return guarded([&] {
    require(estimate, "estimate");
    require(dataset, "dataset");
    if (!dataset->data.has_truth()) throw dsse::InvalidArgument("dataset carries no ground truth");
    const auto truth =
        dsse::extract_state(dataset->data.truth.values, dsse::SelectorMaps(dataset->data.truth.steps));
    const auto& est = estimate->result.state;
    if (mape_pct) *mape_pct = dsse::compute_mape_magnitude(est.magnitude, truth.magnitude);
    if (mae_deg) *mae_deg = dsse::compute_mae_angle(est.angle_deg, truth.angle_deg);
  });
}

void dsse_estimate_free(dsse_estimate* estimate) { delete estimate; }

void dsse_benchmark_options_default(dsse_benchmark_options* options) {
  if (!options) return;
  const dsse::ScenarioConfig c;
  std::memset(options, 0, sizeof *options);
  options->synthetic_phases = c.synthetic_feeder.phases;
  options->synthetic_seed = c.synthetic_feeder.seed;
  options->noise_std = c.noise_std;
  options->runs = c.runs;
  dsse_estimator_options_default(&options->estimator);
  options->baseline_svt = 0;
  options->svt_steps = c.svt_steps;
  options->master_seed = c.master_seed;
  options->threads = 0;
}

dsse_status dsse_benchmark_run(const dsse_benchmark_options* options, const char* out_dir,
                               dsse_benchmark** out) {
  return guarded([&] {
    require(options, "options");
    dsse::ScenarioConfig c;
    if (options->feeder_path) c.feeder_path = options->feeder_path;
    if (options->profile_path) c.profile_path = options->profile_path;
    c.synthetic_feeder.phases = options->synthetic_phases;
    c.synthetic_feeder.seed = options->synthetic_seed;
    if (options->steps) c.steps.assign(options->steps, options->steps + options->steps_count);
    if (options->fractions) {
      c.fractions.assign(options->fractions, options->fractions + options->fractions_count);
    }
    c.noise_std = options->noise_std;
    c.runs = options->runs;
    c.estimator = to_config(&options->estimator);
    c.baseline_svt = options->baseline_svt != 0;
    c.svt_steps = options->svt_steps;
    c.master_seed = options->master_seed;
    c.threads = options->threads;
    auto b = std::make_unique<dsse_benchmark>();
    b->result = dsse::run_scenario(c);
    if (out_dir) dsse::emit_outputs(b->result, out_dir);
    if (out) *out = b.release();
  });
}

size_t dsse_benchmark_summary_count(const dsse_benchmark* benchmark) {
  return benchmark ? benchmark->result.summaries.size() : 0;
}

dsse_status dsse_benchmark_summary(const dsse_benchmark* benchmark, size_t index,
                                   dsse_cell_summary* out) {
  return guarded([&] {
    require(benchmark, "benchmark");
    require(out, "out");
    const auto& all = benchmark->result.summaries;
    if (index >= all.size()) throw dsse::InvalidArgument("summary index out of range");
    const auto& s = all[index];
    out->baseline = s.method == "svt" ? 1 : 0;
    out->cell = s.cell.index;
    out->steps = s.cell.steps;
    out->fraction = s.cell.fraction;
    out->runs = s.runs;
    out->succeeded = s.succeeded;
    out->mape_mean = s.mape_mean;
    out->mape_std = s.mape_std;
    out->mae_mean = s.mae_mean;
    out->mae_std = s.mae_std;
  });
}

size_t dsse_benchmark_failed_cells(const dsse_benchmark* benchmark) {
  if (!benchmark) return 0;
  const auto& all = benchmark->result.summaries;
  return static_cast<size_t>(
      std::count_if(all.begin(), all.end(), [](const auto& s) { return s.failed(); }));
}

double dsse_benchmark_seconds(const dsse_benchmark* benchmark) {
  return benchmark ? benchmark->result.seconds : 0.0;
}

void dsse_benchmark_free(dsse_benchmark* benchmark) { delete benchmark; }

}  // extern "C"

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsse/dsse.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct Failure {
  dsse_status status;
};

void check(dsse_status status) {
  if (status != DSSE_OK) throw Failure{status};
}

int exit_code(dsse_status status) {
  switch (status) {
    case DSSE_OK: return kExitOk;
    case DSSE_ERR_INVALID_ARGUMENT:
    case DSSE_ERR_IO: return kExitConfig;
    default: return kExitNumerical;
  }
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Feeder = Handle<dsse_feeder, dsse_feeder_free>;
using Model = Handle<dsse_linear_model, dsse_linear_model_free>;
using Profile = Handle<dsse_profile, dsse_profile_free>;
using Dataset = Handle<dsse_dataset, dsse_dataset_free>;
using Estimate = Handle<dsse_estimate, dsse_estimate_free>;
using Benchmark = Handle<dsse_benchmark, dsse_benchmark_free>;

struct FeederArgs {
  std::string feeder;
  std::size_t synthetic_phases = 260;
  std::uint64_t synthetic_seed = 123;

  void add(CLI::App* app) {
    app->add_option("--feeder", feeder, "feeder JSON (synthetic when omitted)")
        ->check(CLI::ExistingFile);
    app->add_option("--synthetic-phases", synthetic_phases, "non-slack phases of the synthetic feeder")
        ->capture_default_str();
    app->add_option("--synthetic-seed", synthetic_seed, "seed of the synthetic feeder")
        ->capture_default_str();
  }

  void load(Feeder& f) const {
    if (feeder.empty()) {
      check(dsse_feeder_synthetic(synthetic_phases, synthetic_seed, f.out()));
    } else {
      check(dsse_feeder_load(feeder.c_str(), f.out()));
    }
  }
};

void add_estimator_options(CLI::App* app, dsse_estimator_options& o, std::string& method,
                           bool& no_early_stop) {
  app->add_option("--rank", o.rank, "factor rank r")->capture_default_str();
  app->add_option("--mu", o.mu, "data fidelity weight")->capture_default_str();
  app->add_option("--nu", o.nu, "linear power-flow weight")->capture_default_str();
  app->add_option("--iters", o.max_iterations, "maximum iterations")->capture_default_str();
  app->add_option("--tol", o.tolerance, "relative objective change for early exit")
      ->capture_default_str();
  app->add_flag("--no-early-stop", no_early_stop, "always run --iters iterations");
  app->add_option("--method", method, "subproblem solver")
      ->check(CLI::IsMember({"direct", "cg"}))
      ->capture_default_str();
}

void finish_estimator_options(dsse_estimator_options& o, const std::string& method,
                              bool no_early_stop) {
  o.method = method == "cg" ? DSSE_METHOD_CG : DSSE_METHOD_DIRECT;
  if (no_early_stop) o.early_stop = 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-observability distribution system state estimation by constrained matrix completion"};
  app.set_version_flag("--version", std::string(dsse_version()));
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "simulate a feeder and write a masked measurement matrix");
  FeederArgs gen_feeder;
  gen_feeder.add(gen);
  std::string gen_profile, gen_out, gen_write_feeder, gen_write_profile;
  dsse_generate_options gen_opts;
  dsse_generate_options_default(&gen_opts);
  dsse_profile_options prof_opts;
  dsse_profile_options_default(&prof_opts);
  bool gen_all_entries = false;
  gen->add_option("--profile", gen_profile, "profile CSV (synthetic when omitted)")
      ->check(CLI::ExistingFile);
  gen->add_option("--profile-steps", prof_opts.steps, "steps of the synthetic profile")
      ->capture_default_str();
  gen->add_option("--profile-seed", prof_opts.seed, "seed of the synthetic profile")
      ->capture_default_str();
  gen->add_option("--T", gen_opts.steps, "time steps in the matrix")->capture_default_str();
  gen->add_option("--fraction", gen_opts.fraction, "share of eligible entries observed")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen->add_option("--noise-std", gen_opts.noise_std, "relative noise standard deviation")
      ->capture_default_str();
  gen->add_option("--seed", gen_opts.seed, "seed of the mask and noise")->capture_default_str();
  gen->add_flag("--all-entries", gen_all_entries, "also mask the Re v and Im v rows");
  gen->add_option("--write-feeder", gen_write_feeder, "also save the feeder JSON here");
  gen->add_option("--write-profile", gen_write_profile, "also save the profile CSV here");
  gen->add_option("--out", gen_out, "dataset directory")->required();

  // spectrum
  auto* spec = app.add_subcommand("spectrum", "normalized singular values of a dataset matrix");
  std::string spec_data, spec_out;
  spec->add_option("--data", spec_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  spec->add_option("--out", spec_out, "output CSV")->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "run alternating minimization on one dataset");
  std::string est_data, est_model, est_out, est_method = "direct";
  FeederArgs est_feeder;
  est_feeder.add(est);
  bool est_no_early = false;
  dsse_estimator_options est_opts;
  dsse_estimator_options_default(&est_opts);
  est->add_option("--data", est_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  est->add_option("--model", est_model, "linear-model directory (else linearize --feeder)")
      ->check(CLI::ExistingDirectory);
  add_estimator_options(est, est_opts, est_method, est_no_early);
  est->add_option("--out", est_out, "output directory")->required();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Monte Carlo availability sweep");
  std::string bench_profile, bench_out, bench_method = "direct";
  FeederArgs bench_feeder;
  bench_feeder.add(bench);
  std::vector<std::size_t> bench_steps{1, 3};
  std::vector<double> bench_fractions{0.1, 0.3, 0.5, 0.7};
  bool bench_no_early = false, bench_svt = false;
  dsse_benchmark_options bench_opts;
  dsse_benchmark_options_default(&bench_opts);
  bench->add_option("--profile", bench_profile, "profile CSV (synthetic when omitted)")
      ->check(CLI::ExistingFile);
  bench->add_option("--T", bench_steps, "time steps per cell")->delimiter(',')->capture_default_str();
  bench->add_option("--fractions", bench_fractions, "availability fractions")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  bench->add_option("--noise-std", bench_opts.noise_std, "relative noise standard deviation")
      ->capture_default_str();
  bench->add_option("--runs", bench_opts.runs, "replicates per cell")->capture_default_str();
  add_estimator_options(bench, bench_opts.estimator, bench_method, bench_no_early);
  bench->add_option("--seed", bench_opts.master_seed, "master seed")->capture_default_str();
  bench->add_flag("--baseline-svt", bench_svt, "also run the SVT baseline");
  bench->add_option("--svt-steps", bench_opts.svt_steps, "SVT iterations")->capture_default_str();
  bench->add_option("--threads", bench_opts.threads, "worker threads (0: DSSE_THREADS or all cores)")
      ->capture_default_str();
  bench->add_option("--out", bench_out, "output directory")->required();

  // linearize
  auto* lin = app.add_subcommand("linearize", "export the linear power-flow model");
  FeederArgs lin_feeder;
  lin_feeder.add(lin);
  std::string lin_out;
  lin->add_option("--out", lin_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      Feeder feeder;
      gen_feeder.load(feeder);
      Profile profile;
      if (gen_profile.empty()) {
        if (prof_opts.steps < gen_opts.steps) prof_opts.steps = gen_opts.steps;
        check(dsse_profile_synthetic(feeder.get(), &prof_opts, profile.out()));
      } else {
        check(dsse_profile_load(gen_profile.c_str(), profile.out()));
      }
      if (gen_all_entries) gen_opts.mask_policy = DSSE_MASK_ALL_ENTRIES;
      Dataset ds;
      check(dsse_generate(feeder.get(), profile.get(), &gen_opts, ds.out()));
      check(dsse_dataset_write(ds.get(), gen_out.c_str()));
      if (!gen_write_feeder.empty()) check(dsse_feeder_save(feeder.get(), gen_write_feeder.c_str()));
      if (!gen_write_profile.empty()) {
        check(dsse_profile_save(profile.get(), gen_write_profile.c_str()));
      }
      std::printf("wrote %s: %zu x %zu, %zu known entries\n", gen_out.c_str(),
                  dsse_dataset_rows(ds.get()), dsse_dataset_cols(ds.get()),
                  dsse_dataset_known_count(ds.get()));
    } else if (spec->parsed()) {
      Dataset ds;
      check(dsse_dataset_read(spec_data.c_str(), ds.out()));
      check(dsse_dataset_write_spectrum(ds.get(), spec_out.c_str()));
      std::vector<double> sv(dsse_dataset_rows(ds.get()));
      std::size_t count = 0;
      check(dsse_dataset_spectrum(ds.get(), sv.data(), sv.size(), &count));
      double top = 0.0;
      for (std::size_t i = 0; i < count && i < 4; ++i) top += sv[i];
      std::printf("top-4 mass %.6f\n", top);
    } else if (est->parsed()) {
      finish_estimator_options(est_opts, est_method, est_no_early);
      Dataset ds;
      check(dsse_dataset_read(est_data.c_str(), ds.out()));
      Model model;
      if (!est_model.empty()) {
        check(dsse_linear_model_import(est_model.c_str(), model.out()));
      } else {
        Feeder feeder;
        est_feeder.load(feeder);
        check(dsse_linearize(feeder.get(), model.out()));
      }
      Estimate e;
      check(dsse_estimate_run(ds.get(), model.get(), &est_opts, e.out()));
      check(dsse_estimate_write(e.get(), ds.get(), est_out.c_str()));
      const std::string trace = est_out + "/trace.csv";
      check(dsse_estimate_write_trace(e.get(), trace.c_str()));
      std::printf("%zu iterations%s, objective %.9g, %.3f s\n", dsse_estimate_iterations(e.get()),
                  dsse_estimate_converged(e.get()) ? " (converged)" : "",
                  dsse_estimate_final_objective(e.get()), dsse_estimate_seconds(e.get()));
      if (dsse_dataset_has_truth(ds.get())) {
        double mape = 0.0, mae = 0.0;
        check(dsse_estimate_metrics(e.get(), ds.get(), &mape, &mae));
        std::printf("MAPE |v| %.4f %%, MAE angle %.4f deg\n", mape, mae);
      }
    } else if (bench->parsed()) {
      finish_estimator_options(bench_opts.estimator, bench_method, bench_no_early);
      if (!bench_feeder.feeder.empty()) bench_opts.feeder_path = bench_feeder.feeder.c_str();
      if (!bench_profile.empty()) bench_opts.profile_path = bench_profile.c_str();
      bench_opts.synthetic_phases = bench_feeder.synthetic_phases;
      bench_opts.synthetic_seed = bench_feeder.synthetic_seed;
      bench_opts.steps = bench_steps.data();
      bench_opts.steps_count = bench_steps.size();
      bench_opts.fractions = bench_fractions.data();
      bench_opts.fractions_count = bench_fractions.size();
      bench_opts.baseline_svt = bench_svt ? 1 : 0;
      Benchmark b;
      check(dsse_benchmark_run(&bench_opts, bench_out.c_str(), b.out()));
      std::printf("%-6s %3s %8s %10s %10s %10s %10s  ok\n", "method", "T", "fraction", "mape_pct",
                  "mape_std", "mae_deg", "mae_std");
      for (std::size_t i = 0; i < dsse_benchmark_summary_count(b.get()); ++i) {
        dsse_cell_summary s;
        check(dsse_benchmark_summary(b.get(), i, &s));
        std::printf("%-6s %3zu %8.3g %10.4f %10.4f %10.4f %10.4f  %zu/%zu\n",
                    s.baseline ? "svt" : "am", s.steps, s.fraction, s.mape_mean, s.mape_std,
                    s.mae_mean, s.mae_std, s.succeeded, s.runs);
      }
      std::printf("%.1f s, outputs in %s\n", dsse_benchmark_seconds(b.get()), bench_out.c_str());
      if (dsse_benchmark_failed_cells(b.get()) > 0) {
        std::fprintf(stderr, "error: %zu cells failed in every replicate (see manifest.json)\n",
                     dsse_benchmark_failed_cells(b.get()));
        return kExitNumerical;
      }
    } else if (lin->parsed()) {
      Feeder feeder;
      lin_feeder.load(feeder);
      Model model;
      check(dsse_linearize(feeder.get(), model.out()));
      check(dsse_linear_model_export(model.get(), feeder.get(), lin_out.c_str()));
      std::printf("wrote %s: %zu phases\n", lin_out.c_str(), dsse_linear_model_phase_count(model.get()));
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error (%s): %s\n", dsse_status_name(f.status), dsse_last_error());
    return exit_code(f.status);
  }
  return kExitOk;
}

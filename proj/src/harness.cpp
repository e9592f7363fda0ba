#include "dsse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dsse/error.hpp"
#include "dsse/io.hpp"
#include "dsse/metrics.hpp"
#include "dsse/rng.hpp"
#include "dsse/version.hpp"

namespace dsse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::size_t resolve_threads(std::size_t requested, std::size_t jobs) {
  std::size_t threads = requested;
  if (threads == 0) {
    if (const char* env = std::getenv("DSSE_THREADS")) {
      try {
        threads = static_cast<std::size_t>(std::stoul(env));
      } catch (const std::exception&) {
        throw InvalidArgument(std::string("DSSE_THREADS is not a number: '") + env + "'");
      }
    }
  }
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(threads, jobs));
}

std::string fraction_label(double fraction) { return format_double(fraction); }

// One T: noiseless M, its truth, and the penalty shared by all replicates.
struct Horizon {
  std::size_t steps = 0;
  MeasurementMatrix m;
  PhaseEstimates truth;
  std::shared_ptr<const PowerFlowPenalty> penalty;
};

void run_replicate(const ScenarioConfig& config, const Horizon& hz, const CellId& cell,
                   std::size_t rep, MetricsRecord* am, MetricsRecord* svt, IterationTrace* trace) {
  const std::uint64_t ms = mask_seed(config.master_seed, cell.index, rep);
  const std::uint64_t ns = noise_seed(config.master_seed, cell.index, rep);
  for (MetricsRecord* rec : {am, svt}) {
    if (!rec) continue;
    rec->cell = cell;
    rec->replicate = rep;
    rec->mask_seed = ms;
    rec->noise_seed = ns;
  }
  am->method = "am";
  if (svt) svt->method = "svt";

  ObservationMask mask;
  MeasurementMatrix noisy;
  try {
    mask = apply_observation_mask(hz.m, cell.fraction, ms, config.mask_policy);
    noisy = inject_noise(hz.m, mask, NoiseSpec{config.noise_std, ns});
  } catch (const Error& e) {
    for (MetricsRecord* rec : {am, svt}) {
      if (rec) rec->error = e.what();
    }
    return;
  }

  try {
    const auto result = run_alternating_minimization(noisy, mask, hz.penalty, config.estimator);
    am->mape_pct = compute_mape_magnitude(result.state.magnitude, hz.truth.magnitude);
    am->mae_deg = compute_mae_angle(result.state.angle_deg, hz.truth.angle_deg);
    am->seconds = result.seconds;
    am->iterations = result.trace.iterations.size();
    am->final_objective = result.trace.iterations.empty() ? result.trace.initial_objective
                                                          : result.trace.iterations.back().objective;
    am->ok = true;
    if (trace) *trace = result.trace;
  } catch (const Error& e) {
    am->error = e.what();
  }

  if (!svt) return;
  try {
    const auto start = Clock::now();
    const Eigen::MatrixXd x = svt_complete(noisy, mask, config.estimator.mu, config.svt_steps);
    svt->seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const auto state = extract_state(x, SelectorMaps(hz.steps));
    svt->mape_pct = compute_mape_magnitude(state.magnitude, hz.truth.magnitude);
    svt->mae_deg = compute_mae_angle(state.angle_deg, hz.truth.angle_deg);
    svt->iterations = config.svt_steps;
    svt->ok = true;
  } catch (const Error& e) {
    svt->error = e.what();
  }
}

json config_json(const ScenarioConfig& c) {
  json j;
  j["feeder"] = c.feeder_path.empty() ? json("synthetic") : json(c.feeder_path.string());
  j["profile"] = c.profile_path.empty() ? json("synthetic") : json(c.profile_path.string());
  if (c.feeder_path.empty()) {
    j["synthetic_feeder"] = {{"phases", c.synthetic_feeder.phases},
                             {"seed", c.synthetic_feeder.seed},
                             {"chain_probability", c.synthetic_feeder.chain_probability},
                             {"impedance_scale", c.synthetic_feeder.impedance_scale}};
  }
  if (c.profile_path.empty()) {
    j["synthetic_profile"] = {{"steps", c.synthetic_profile.steps},
                              {"start_minute", c.synthetic_profile.start_minute},
                              {"seed", c.synthetic_profile.seed},
                              {"solar_share", c.synthetic_profile.solar_share},
                              {"load_variability", c.synthetic_profile.load_variability},
                              {"min_voltage", c.synthetic_profile.min_voltage}};
  }
  j["T"] = c.steps;
  j["fractions"] = c.fractions;
  j["noise_std"] = c.noise_std;
  j["mask_policy"] = to_string(c.mask_policy);
  j["runs"] = c.runs;
  j["estimator"] = {{"rank", c.estimator.rank},
                    {"mu", c.estimator.mu},
                    {"nu", c.estimator.nu},
                    {"max_iterations", c.estimator.max_iterations},
                    {"tolerance", c.estimator.tolerance},
                    {"early_stop", c.estimator.early_stop},
                    {"method", to_string(c.estimator.method)},
                    {"cg_threshold", c.estimator.cg_threshold}};
  j["baseline_svt"] = c.baseline_svt;
  j["svt_steps"] = c.svt_steps;
  j["master_seed"] = c.master_seed;
  return j;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (steps.empty()) throw InvalidArgument("at least one T is required");
  for (auto t : steps) {
    if (t == 0) throw InvalidArgument("T must be at least 1");
  }
  if (fractions.empty()) throw InvalidArgument("at least one availability fraction is required");
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidArgument("availability fractions must lie in [0, 1]");
  }
  if (!(noise_std >= 0.0)) throw InvalidArgument("noise standard deviation must be >= 0");
  if (runs == 0) throw InvalidArgument("runs must be at least 1");
  if (baseline_svt && svt_steps == 0) throw InvalidArgument("SVT needs at least one step");
  estimator.validate();
}

ScenarioInputs load_scenario_inputs(const ScenarioConfig& config) {
  ScenarioInputs in;
  in.feeder = config.feeder_path.empty() ? make_synthetic_feeder(config.synthetic_feeder)
                                         : load_feeder(config.feeder_path);
  if (config.profile_path.empty()) {
    SyntheticProfileSpec spec = config.synthetic_profile;
    spec.steps = std::max(spec.steps, *std::max_element(config.steps.begin(), config.steps.end()));
    in.profile = make_synthetic_profile(in.feeder, spec);
  } else {
    in.profile = load_profile(config.profile_path);
  }
  return in;
}

std::vector<CellId> enumerate_cells(const ScenarioConfig& config) {
  std::vector<CellId> cells;
  for (auto t : config.steps) {
    for (double f : config.fractions) cells.push_back({cells.size(), t, f});
  }
  return cells;
}

std::uint64_t mask_seed(std::uint64_t master, std::size_t cell, std::size_t replicate) {
  return derive_seed(master, {cell, replicate, 0});
}

std::uint64_t noise_seed(std::uint64_t master, std::size_t cell, std::size_t replicate) {
  return derive_seed(master, {cell, replicate, 1});
}

std::vector<CellSummary> summarize(const std::vector<MetricsRecord>& records) {
  std::vector<CellSummary> out;
  for (const auto& rec : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary& s) {
      return s.method == rec.method && s.cell.index == rec.cell.index;
    });
    if (it == out.end()) {
      out.push_back({rec.method, rec.cell});
      it = out.end() - 1;
    }
    ++it->runs;
  }
  for (auto& s : out) {
    std::vector<double> mape, mae;
    for (const auto& rec : records) {
      if (rec.ok && rec.method == s.method && rec.cell.index == s.cell.index) {
        mape.push_back(rec.mape_pct);
        mae.push_back(rec.mae_deg);
      }
    }
    s.succeeded = mape.size();
    if (mape.empty()) {
      s.mape_mean = s.mape_std = s.mae_mean = s.mae_std = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    auto stats = [](const std::vector<double>& v, double* mean, double* sd) {
      double sum = 0.0;
      for (double x : v) sum += x;
      *mean = sum / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - *mean) * (x - *mean);
      *sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    };
    stats(mape, &s.mape_mean, &s.mape_std);
    stats(mae, &s.mae_mean, &s.mae_std);
  }
  return out;
}

const CellSummary& ScenarioResult::summary(const std::string& method, std::size_t steps,
                                           double fraction) const {
  for (const auto& s : summaries) {
    if (s.method == method && s.cell.steps == steps && s.cell.fraction == fraction) return s;
  }
  throw InvalidArgument("no " + method + " cell for T = " + std::to_string(steps) +
                        ", fraction = " + format_double(fraction));
}

bool ScenarioResult::any_cell_failed() const {
  return std::any_of(summaries.begin(), summaries.end(),
                     [](const CellSummary& s) { return s.failed(); });
}

ScenarioResult run_scenario(const ScenarioConfig& config, const ScenarioInputs& inputs) {
  config.validate();
  const auto start = Clock::now();
  ScenarioResult result;
  result.config = config;

  const auto adm = assemble_admittance(inputs.feeder);
  const auto lin = linearize_power_flow(adm, inputs.feeder.slack_voltage);
  result.phases = adm.size();
  result.total_phases = inputs.feeder.total_phase_count();

  std::map<std::size_t, Horizon> horizons;
  for (auto t : config.steps) {
    if (horizons.count(t)) continue;
    if (t > inputs.profile.steps()) {
      throw InvalidArgument("T = " + std::to_string(t) + " exceeds the " +
                            std::to_string(inputs.profile.steps()) + "-step profile");
    }
    Horizon hz;
    hz.steps = t;
    const auto window = inputs.profile.window(inputs.profile.steps() - t, t);
    hz.m = build_measurement_matrix(
        simulate_timeseries(adm, inputs.feeder.slack_voltage, window, PowerFlowOptions{}));
    hz.truth = extract_state(hz.m.values, SelectorMaps(t));
    hz.penalty = std::make_shared<const PowerFlowPenalty>(StackedLinearModel(lin, t));
    result.spectra.emplace_back(t, singular_value_spectrum(hz.m.values));
    horizons.emplace(t, std::move(hz));
  }

  const auto cells = enumerate_cells(config);
  const std::size_t jobs = cells.size() * config.runs;
  std::vector<MetricsRecord> am(jobs), svt(config.baseline_svt ? jobs : 0);
  std::vector<IterationTrace> traces(cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const auto& cell = cells[job / config.runs];
      const std::size_t rep = job % config.runs;
      run_replicate(config, horizons.at(cell.steps), cell, rep, &am[job],
                    config.baseline_svt ? &svt[job] : nullptr,
                    rep == 0 ? &traces[cell.index] : nullptr);
    }
  };
  const std::size_t threads = resolve_threads(config.threads, jobs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Baseline rows follow the estimator rows of the same cell.
  for (const auto& cell : cells) {
    const std::size_t first = cell.index * config.runs;
    for (std::size_t k = first; k < first + config.runs; ++k) result.records.push_back(am[k]);
    if (config.baseline_svt) {
      for (std::size_t k = first; k < first + config.runs; ++k) result.records.push_back(svt[k]);
    }
    if (am[first].ok) result.traces.emplace(cell.index, std::move(traces[cell.index]));
  }
  result.summaries = summarize(result.records);
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  return run_scenario(config, load_scenario_inputs(config));
}

std::string metrics_csv(const ScenarioResult& result) {
  if (result.records.empty()) throw InvalidArgument("no metrics records to write");
  std::ostringstream out;
  out << "row_type,method,cell,T,fraction,replicate,runs,status,mape_pct,mape_std,mae_deg,mae_std,"
         "iterations,final_objective,mask_seed,noise_seed\n";
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
  for (const auto& s : result.summaries) {
    for (const auto& r : result.records) {
      if (r.method != s.method || r.cell.index != s.cell.index) continue;
      out << "replicate," << r.method << ',' << r.cell.index << ',' << r.cell.steps << ','
          << fraction_label(r.cell.fraction) << ',' << r.replicate << ",1,"
          << (r.ok ? "ok" : "failed") << ',' << (r.ok ? num(r.mape_pct) : "") << ",,"
          << (r.ok ? num(r.mae_deg) : "") << ",," << (r.ok ? std::to_string(r.iterations) : "")
          << ',' << (r.ok && r.method == "am" ? num(r.final_objective) : "") << ','
          << r.mask_seed << ',' << r.noise_seed << '\n';
    }
    out << "aggregate," << s.method << ',' << s.cell.index << ',' << s.cell.steps << ','
        << fraction_label(s.cell.fraction) << ",," << s.succeeded << ','
        << (s.failed() ? "failed" : "ok") << ',' << num(s.mape_mean) << ',' << num(s.mape_std)
        << ',' << num(s.mae_mean) << ',' << num(s.mae_std) << ",,,,\n";
  }
  return out.str();
}

void emit_outputs(const ScenarioResult& result, const fs::path& dir) {
  const std::string metrics = metrics_csv(result);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };

  open("metrics.csv") << metrics;
  {
    auto out = open("timing.csv");
    out << "method,cell,T,fraction,replicate,seconds\n";
    for (const auto& r : result.records) {
      out << r.method << ',' << r.cell.index << ',' << r.cell.steps << ','
          << fraction_label(r.cell.fraction) << ',' << r.replicate << ','
          << (r.ok ? format_double(r.seconds) : "") << '\n';
    }
  }
  write_spectrum_csv(result.spectra, dir / "spectrum.csv");

  json traces = json::array();
  for (const auto& cell : enumerate_cells(result.config)) {
    auto it = result.traces.find(cell.index);
    if (it == result.traces.end()) continue;
    const std::string name = "trace_T" + std::to_string(cell.steps) + "_f" +
                             fraction_label(cell.fraction) + ".csv";
    write_trace_csv(it->second, dir / name);
    traces.push_back(name);
  }

  json seeds = json::array();
  for (const auto& cell : enumerate_cells(result.config)) {
    for (std::size_t rep = 0; rep < result.config.runs; ++rep) {
      seeds.push_back({{"cell", cell.index},
                       {"replicate", rep},
                       {"mask", mask_seed(result.config.master_seed, cell.index, rep)},
                       {"noise", noise_seed(result.config.master_seed, cell.index, rep)}});
    }
  }
  json cells = json::array();
  for (const auto& cell : enumerate_cells(result.config)) {
    cells.push_back({{"cell", cell.index}, {"T", cell.steps}, {"fraction", cell.fraction}});
  }
  json failures = json::array();
  for (const auto& r : result.records) {
    if (!r.ok) {
      failures.push_back({{"method", r.method},
                          {"cell", r.cell.index},
                          {"replicate", r.replicate},
                          {"error", r.error}});
    }
  }

  json manifest;
  manifest["version"] = kVersion;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
#if defined(__VERSION__)
  manifest["compiler"] = __VERSION__;
#endif
  manifest["config"] = config_json(result.config);
  manifest["phases"] = result.phases;
  manifest["total_phases"] = result.total_phases;
  manifest["linearization"] = kLinearizationVariant;
  manifest["seed_derivation"] =
      "derive_seed(master, {cell, replicate, stream}); stream 0 = mask, 1 = noise";
  manifest["cells"] = cells;
  manifest["seeds"] = seeds;
  manifest["failures"] = failures;
  manifest["seconds"] = result.seconds;
  manifest["files"] = {{"metrics", "metrics.csv"},
                       {"timing", "timing.csv"},
                       {"spectrum", "spectrum.csv"},
                       {"traces", traces}};
  open("manifest.json") << manifest.dump(1) << '\n';
}

}  // namespace dsse

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dsse/estimator.hpp"
#include "dsse/feeder.hpp"
#include "dsse/measurement.hpp"
#include "dsse/synthetic.hpp"

namespace dsse {

struct ScenarioConfig {
  std::filesystem::path feeder_path;   // empty: synthetic feeder
  std::filesystem::path profile_path;  // empty: synthetic profile
  SyntheticFeederSpec synthetic_feeder;
  SyntheticProfileSpec synthetic_profile;

  // Each T uses the last T steps of the profile.
  std::vector<std::size_t> steps{1, 3};
  std::vector<double> fractions{0.1, 0.3, 0.5, 0.7};
  double noise_std = 0.01;
  MaskPolicy mask_policy = MaskPolicy::kMeasurementRows;
  std::size_t runs = 50;
  EstimatorConfig estimator;
  bool baseline_svt = false;
  std::size_t svt_steps = 300;
  std::uint64_t master_seed = 2024;
  std::size_t threads = 0;  // 0: DSSE_THREADS, else the hardware count

  void validate() const;
};

// Feeder and profile named by the config (synthetic when paths are empty).
struct ScenarioInputs {
  Feeder feeder;
  LoadProfile profile;
};

ScenarioInputs load_scenario_inputs(const ScenarioConfig& config);

// Cells are ordered by T, then by fraction.
struct CellId {
  std::size_t index = 0;
  std::size_t steps = 0;
  double fraction = 0.0;
};

std::vector<CellId> enumerate_cells(const ScenarioConfig& config);

std::uint64_t mask_seed(std::uint64_t master, std::size_t cell, std::size_t replicate);
std::uint64_t noise_seed(std::uint64_t master, std::size_t cell, std::size_t replicate);

struct MetricsRecord {
  std::string method;  // "am" or "svt"
  CellId cell;
  std::size_t replicate = 0;
  bool ok = false;
  std::string error;
  double mape_pct = 0.0;
  double mae_deg = 0.0;
  double seconds = 0.0;
  std::size_t iterations = 0;
  double final_objective = 0.0;
  std::uint64_t mask_seed = 0;
  std::uint64_t noise_seed = 0;
};

struct CellSummary {
  std::string method;
  CellId cell;
  std::size_t runs = 0;
  std::size_t succeeded = 0;
  double mape_mean = 0.0;
  double mape_std = 0.0;  // sample standard deviation; 0 for one run
  double mae_mean = 0.0;
  double mae_std = 0.0;

  bool failed() const { return succeeded == 0; }
};

std::vector<CellSummary> summarize(const std::vector<MetricsRecord>& records);

struct ScenarioResult {
  ScenarioConfig config;
  std::size_t phases = 0;        // non-slack phases (columns of M)
  std::size_t total_phases = 0;  // including the slack bus
  std::vector<MetricsRecord> records;
  std::vector<CellSummary> summaries;
  std::vector<std::pair<std::size_t, SingularValueSpectrum>> spectra;  // noiseless M per T
  std::map<std::size_t, IterationTrace> traces;  // replicate 0 of each cell, by cell index
  double seconds = 0.0;

  const CellSummary& summary(const std::string& method, std::size_t steps, double fraction) const;
  bool any_cell_failed() const;
};

ScenarioResult run_scenario(const ScenarioConfig& config, const ScenarioInputs& inputs);
ScenarioResult run_scenario(const ScenarioConfig& config);

// metrics.csv, timing.csv, spectrum.csv, trace_T<T>_f<fraction>.csv and
// manifest.json. metrics.csv carries no timing so it is reproducible byte for
// byte.
void emit_outputs(const ScenarioResult& result, const std::filesystem::path& dir);

std::string metrics_csv(const ScenarioResult& result);

}  // namespace dsse

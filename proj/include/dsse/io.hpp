#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dsse/estimator.hpp"
#include "dsse/feeder.hpp"
#include "dsse/measurement.hpp"

namespace dsse {

// Shortest decimal form that round-trips.
std::string format_double(double value);

// Feeder JSON:
//   { "bases": {"power_va": 1e6, "voltage_v": 4160},
//     "slack_voltage": [[re, im], [re, im], [re, im]],
//     "buses": [{"index": 0, "phases": "abc"}, ...],
//     "lines": [{"from": 0, "to": 1, "impedance": [[[re, im], ...], ...]}, ...] }
Feeder parse_feeder_json(const std::string& text);
std::string feeder_to_json(const Feeder& feeder);
Feeder load_feeder(const std::filesystem::path& path);
void save_feeder(const Feeder& feeder, const std::filesystem::path& path);

// Profile CSV: header of bus.phase labels, one row per step, cells "re:im".
LoadProfile parse_profile_csv(std::istream& in);
LoadProfile load_profile(const std::filesystem::path& path);
void save_profile(const LoadProfile& profile, const std::filesystem::path& path);

// Linear-model export directory: A1.csv ... C2.csv (n x n, no header),
// w.csv ("phase,re,im") and linear_model.json (ordering and metadata).
void export_linear_model(const LinearPowerFlowModel& model, const std::filesystem::path& dir,
                         std::size_t total_phases);
LinearPowerFlowModel import_linear_model(const std::filesystem::path& dir);

// Labels of the rows of a 5T x n matrix: "t1.re_v", "t1.im_v", "t1.abs_v",
// "t1.p", "t1.q", "t2.re_v", ...
std::vector<std::string> measurement_row_labels(std::size_t steps);

// Ground truth plus one masked, noisy realization of it.
struct MeasurementDataset {
  std::vector<PhaseId> phases;
  MeasurementMatrix truth;     // noiseless; empty when unavailable
  MeasurementMatrix observed;  // noisy values on the mask, zero elsewhere
  ObservationMask mask;
  NoiseSpec noise;

  bool has_truth() const { return truth.values.size() != 0; }
};

// Dataset directory: truth.csv, masked.csv (unknown cells empty), state.csv
// (true magnitude/angle per step and phase) and the matrix.json sidecar
// holding dimensions, mask entries and seeds.
void write_dataset(const MeasurementDataset& dataset, const std::filesystem::path& dir);
MeasurementDataset read_dataset(const std::filesystem::path& dir);

// "T,index,normalized,cumulative"
void write_spectrum_csv(const std::vector<std::pair<std::size_t, SingularValueSpectrum>>& spectra,
                        const std::filesystem::path& path);

// "iteration,objective,objective_after_u,step_u,step_v,seconds"; row 0 holds
// the initial objective.
void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path);

// estimate.json (config, trace, per-phase estimates, metrics when the dataset
// carries truth) and errors.csv (per-phase errors, only with truth).
void write_estimate(const EstimateResult& result, const MeasurementDataset& dataset,
                    const std::filesystem::path& dir);

}  // namespace dsse

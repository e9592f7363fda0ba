#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dsse/feeder.hpp"

namespace dsse {

// Per-phase complex injections over T time steps.
struct LoadProfile {
  std::vector<PhaseId> phases;  // column order
  Eigen::MatrixXcd injections;  // T x phases, p.u.
  std::string resolution = "1min";

  std::size_t steps() const { return static_cast<std::size_t>(injections.rows()); }

  // Rows [first, first + count).
  LoadProfile window(std::size_t first, std::size_t count) const;
};

struct GroundTruthSeries {
  std::vector<PhaseId> phases;
  std::vector<StateVector> states;

  std::size_t steps() const { return states.size(); }
};

// Rows within one time block of M.
enum class MeasurementRow : int {
  kVoltageReal = 0,
  kVoltageImag = 1,
  kVoltageMagnitude = 2,
  kActivePower = 3,
  kReactivePower = 4,
};

inline constexpr std::size_t kRowsPerStep = 5;

// The 5T x |P| data matrix.
struct MeasurementMatrix {
  Eigen::MatrixXd values;
  std::size_t steps = 0;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

// Which entries may be observed.
enum class MaskPolicy {
  kMeasurementRows,  // |v|, P and Q rows; phasor rows always unknown
  kAllEntries,       // every entry, for generic completion
};

const char* to_string(MaskPolicy policy);
MaskPolicy mask_policy_from_string(const std::string& name);

// Known-index set Omega, stored as (row, col) pairs in row-major order.
struct ObservationMask {
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  std::size_t rows = 0;
  std::size_t cols = 0;
  MaskPolicy policy = MaskPolicy::kMeasurementRows;
  double fraction = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool contains(std::size_t row, std::size_t col) const;

  // 1 where observed, 0 elsewhere.
  Eigen::MatrixXd indicator() const;

  static ObservationMask full(std::size_t rows, std::size_t cols,
                              MaskPolicy policy = MaskPolicy::kAllEntries);
};

struct NoiseSpec {
  double relative_std = 0.01;
  std::uint64_t seed = 0;
};

// True when `row` may be observed under `policy`.
bool is_eligible(std::size_t row, MaskPolicy policy);

// One exact power-flow solve per step of `profile`.
GroundTruthSeries simulate_timeseries(const Feeder& feeder, const LoadProfile& profile,
                                      const PowerFlowOptions& options = {});

// Same, reusing an assembled admittance.
GroundTruthSeries simulate_timeseries(const MultiphaseAdmittance& adm,
                                      const Eigen::VectorXcd& v0, const LoadProfile& profile,
                                      const PowerFlowOptions& options = {});

MeasurementMatrix build_measurement_matrix(const GroundTruthSeries& series);

// Uniform sample without replacement of round(fraction * eligible) entries.
ObservationMask apply_observation_mask(const MeasurementMatrix& m, double fraction,
                                       std::uint64_t seed,
                                       MaskPolicy policy = MaskPolicy::kMeasurementRows);

// M_rc <- M_rc (1 + eps), eps ~ N(0, relative_std^2), for (r, c) in the mask.
MeasurementMatrix inject_noise(const MeasurementMatrix& m, const ObservationMask& mask,
                               const NoiseSpec& spec);

// P_Omega(M): unknown entries set to zero.
Eigen::MatrixXd project_observed(const Eigen::MatrixXd& m, const ObservationMask& mask);

struct SingularValueSpectrum {
  Eigen::VectorXd normalized;  // descending, sums to 1
  Eigen::VectorXd cumulative;

  // Cumulative mass of the leading k values.
  double leading_mass(std::size_t k) const;
};

SingularValueSpectrum singular_value_spectrum(const Eigen::MatrixXd& m);

}  // namespace dsse

#include "dsse/measurement.hpp"

#include <algorithm>
#include <cmath>

#include "dsse/error.hpp"
#include "dsse/rng.hpp"

namespace dsse {

LoadProfile LoadProfile::window(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > steps()) {
    throw InvalidArgument("profile window [" + std::to_string(first) + ", " +
                          std::to_string(first + count) + ") exceeds " +
                          std::to_string(steps()) + " steps");
  }
  LoadProfile out;
  out.phases = phases;
  out.resolution = resolution;
  out.injections = injections.middleRows(static_cast<Eigen::Index>(first),
                                         static_cast<Eigen::Index>(count));
  return out;
}

const char* to_string(MaskPolicy policy) {
  switch (policy) {
    case MaskPolicy::kMeasurementRows: return "measurement-rows";
    case MaskPolicy::kAllEntries: return "all-entries";
  }
  return "unknown";
}

MaskPolicy mask_policy_from_string(const std::string& name) {
  if (name == "measurement-rows") return MaskPolicy::kMeasurementRows;
  if (name == "all-entries") return MaskPolicy::kAllEntries;
  throw InvalidArgument("unknown mask policy '" + name + "'");
}

bool ObservationMask::contains(std::size_t row, std::size_t col) const {
  return std::binary_search(entries.begin(), entries.end(), std::make_pair(row, col));
}

Eigen::MatrixXd ObservationMask::indicator() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                              static_cast<Eigen::Index>(cols));
  for (const auto& [r, c] : entries) {
    out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
  }
  return out;
}

ObservationMask ObservationMask::full(std::size_t rows, std::size_t cols, MaskPolicy policy) {
  ObservationMask mask;
  mask.rows = rows;
  mask.cols = cols;
  mask.policy = policy;
  mask.fraction = 1.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!is_eligible(r, policy)) continue;
    for (std::size_t c = 0; c < cols; ++c) mask.entries.emplace_back(r, c);
  }
  return mask;
}

bool is_eligible(std::size_t row, MaskPolicy policy) {
  if (policy == MaskPolicy::kAllEntries) return true;
  return row % kRowsPerStep >= static_cast<std::size_t>(MeasurementRow::kVoltageMagnitude);
}

GroundTruthSeries simulate_timeseries(const MultiphaseAdmittance& adm,
                                      const Eigen::VectorXcd& v0, const LoadProfile& profile,
                                      const PowerFlowOptions& options) {
  if (profile.phases != adm.ordering()) {
    throw InvalidArgument("profile phases do not match the feeder's non-slack phases");
  }
  if (profile.steps() == 0) throw InvalidArgument("profile has no time steps");
  GroundTruthSeries series;
  series.phases = profile.phases;
  series.states.reserve(profile.steps());
  for (Eigen::Index t = 0; t < profile.injections.rows(); ++t) {
    const Eigen::VectorXcd s = profile.injections.row(t).transpose();
    try {
      series.states.push_back(solve_power_flow(adm, s, v0, options));
    } catch (const NumericalError& e) {
      throw NumericalError("time step " + std::to_string(t) + ": " + e.what());
    }
  }
  return series;
}

GroundTruthSeries simulate_timeseries(const Feeder& feeder, const LoadProfile& profile,
                                      const PowerFlowOptions& options) {
  const auto adm = assemble_admittance(feeder);
  return simulate_timeseries(adm, feeder.slack_voltage, profile, options);
}

MeasurementMatrix build_measurement_matrix(const GroundTruthSeries& series) {
  if (series.states.empty()) throw InvalidArgument("ground-truth series is empty");
  const auto n = series.states.front().v.size();
  const auto steps = static_cast<Eigen::Index>(series.states.size());
  MeasurementMatrix m;
  m.steps = series.states.size();
  m.values.resize(static_cast<Eigen::Index>(kRowsPerStep) * steps, n);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto& state = series.states[static_cast<std::size_t>(t)];
    if (state.v.size() != n || state.s.size() != n) {
      throw InvalidArgument("ground-truth states have inconsistent dimensions");
    }
    const Eigen::Index base = 5 * t;
    m.values.row(base + 0) = state.v.real().transpose();
    m.values.row(base + 1) = state.v.imag().transpose();
    m.values.row(base + 2) = state.v.cwiseAbs().transpose();
    m.values.row(base + 3) = state.s.real().transpose();
    m.values.row(base + 4) = state.s.imag().transpose();
  }
  return m;
}

ObservationMask apply_observation_mask(const MeasurementMatrix& m, double fraction,
                                       std::uint64_t seed, MaskPolicy policy) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("availability fraction must lie in [0, 1]");
  }
  ObservationMask all = ObservationMask::full(m.rows(), m.cols(), policy);
  auto& pool = all.entries;
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));

  // Partial Fisher-Yates over the eligible entries.
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());

  all.fraction = fraction;
  all.seed = seed;
  return all;
}

MeasurementMatrix inject_noise(const MeasurementMatrix& m, const ObservationMask& mask,
                               const NoiseSpec& spec) {
  if (!(spec.relative_std >= 0.0)) throw InvalidArgument("noise standard deviation must be >= 0");
  if (mask.rows != m.rows() || mask.cols != m.cols()) {
    throw InvalidArgument("mask dimensions do not match the measurement matrix");
  }
  MeasurementMatrix out = m;
  if (spec.relative_std == 0.0) return out;
  Rng rng(spec.seed);
  for (const auto& [r, c] : mask.entries) {
    auto& value = out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    value *= 1.0 + spec.relative_std * rng.normal();
  }
  return out;
}

Eigen::MatrixXd project_observed(const Eigen::MatrixXd& m, const ObservationMask& mask) {
  if (mask.rows != static_cast<std::size_t>(m.rows()) ||
      mask.cols != static_cast<std::size_t>(m.cols())) {
    throw InvalidArgument("mask dimensions do not match the matrix");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (const auto& [r, c] : mask.entries) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto j = static_cast<Eigen::Index>(c);
    out(i, j) = m(i, j);
  }
  return out;
}

double SingularValueSpectrum::leading_mass(std::size_t k) const {
  if (k == 0 || cumulative.size() == 0) return 0.0;
  const auto idx = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), cumulative.size()) - 1;
  return cumulative(idx);
}

SingularValueSpectrum singular_value_spectrum(const Eigen::MatrixXd& m) {
  if (m.size() == 0) throw InvalidArgument("spectrum of an empty matrix is undefined");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd sigma = svd.singularValues();
  const double total = sigma.sum();
  if (!(total > 0.0)) throw InvalidArgument("spectrum of a zero matrix is undefined");
  SingularValueSpectrum out;
  out.normalized = sigma / total;
  out.cumulative.resize(sigma.size());
  double running = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    running += out.normalized(i);
    out.cumulative(i) = running;
  }
  return out;
}

}  // namespace dsse

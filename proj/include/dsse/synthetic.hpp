#pragma once

#include <cstddef>
#include <cstdint>

#include "dsse/feeder.hpp"
#include "dsse/measurement.hpp"

namespace dsse {

// Random radial feeder with a three-phase trunk and one- and two-phase
// laterals, built until the non-slack phase count reaches `phases`.
struct SyntheticFeederSpec {
  std::size_t phases = 260;
  std::uint64_t seed = 123;
  double chain_probability = 0.5;  // attach to the previous bus rather than a random one
  double impedance_scale = 1.0;
};

Feeder make_synthetic_feeder(const SyntheticFeederSpec& spec);

// Per-phase load and rooftop-solar series at one-minute resolution starting at
// `start_minute` after midnight. Loads are rescaled so the lowest voltage
// magnitude over the series equals `min_voltage`.
struct SyntheticProfileSpec {
  std::size_t steps = 3;
  std::size_t start_minute = 12 * 60;
  std::uint64_t seed = 7;
  double solar_share = 0.3;        // fraction of phases with PV
  double load_variability = 0.01;  // per-minute relative jitter of each load
  double min_voltage = 0.95;
};

LoadProfile make_synthetic_profile(const Feeder& feeder, const SyntheticProfileSpec& spec);

}  // namespace dsse

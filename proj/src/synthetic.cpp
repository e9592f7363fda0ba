#include "dsse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dsse/error.hpp"
#include "dsse/rng.hpp"

namespace dsse {

namespace {

Eigen::MatrixXcd line_impedance(std::size_t phases, double length, double scale) {
  const Complex self(0.3465 * length * scale, 1.0179 * length * scale);
  const Complex mutual(0.1560 * length * scale, 0.5017 * length * scale);
  const auto k = static_cast<Eigen::Index>(phases);
  Eigen::MatrixXcd z = Eigen::MatrixXcd::Constant(k, k, mutual);
  z.diagonal().setConstant(self);
  return z;
}

std::vector<Phase> pick_phases(const std::vector<Phase>& parent, std::size_t count, Rng& rng) {
  std::vector<Phase> pool = parent;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

Feeder make_synthetic_feeder(const SyntheticFeederSpec& spec) {
  if (spec.phases == 0) throw InvalidArgument("synthetic feeder needs at least one phase");
  Rng rng(derive_seed(spec.seed, {0}));
  Feeder feeder;
  feeder.buses.push_back({0, {Phase::kA, Phase::kB, Phase::kC}});
  const double deg = std::numbers::pi / 180.0;
  feeder.slack_voltage.resize(3);
  feeder.slack_voltage << std::polar(1.0, 0.0), std::polar(1.0, -120.0 * deg),
      std::polar(1.0, 120.0 * deg);

  // Line data is in ohms per mile; lengths are in miles.
  const double base_impedance = feeder.base_voltage * feeder.base_voltage / feeder.base_power;
  std::size_t remaining = spec.phases;
  std::size_t next_index = 1;
  std::vector<std::size_t> backbone{0};
  while (remaining > 0) {
    std::size_t parent_pos = feeder.buses.size() - 1;
    if (rng.uniform() >= spec.chain_probability) {
      // laterals tap the three-phase backbone
      parent_pos = backbone[static_cast<std::size_t>(rng.below(backbone.size()))];
    }
    const auto& parent = feeder.buses[parent_pos];
    std::size_t count = 1;
    const double u = rng.uniform();
    if (parent.phases.size() == 3) {
      count = u < 0.45 ? 3 : (u < 0.55 ? 2 : 1);
    } else if (parent.phases.size() == 2) {
      count = u < 0.5 ? 2 : 1;
    }
    count = std::min(count, remaining);
    Bus child{next_index++, pick_phases(parent.phases, count, rng)};
    const double length = rng.uniform(0.05, 0.4);
    feeder.lines.push_back({parent.index, child.index,
                            line_impedance(count, length, spec.impedance_scale / base_impedance)});
    if (count == 3) backbone.push_back(feeder.buses.size());
    feeder.buses.push_back(std::move(child));
    remaining -= count;
  }
  validate(feeder);
  return feeder;
}

LoadProfile make_synthetic_profile(const Feeder& feeder, const SyntheticProfileSpec& spec) {
  if (spec.steps == 0) throw InvalidArgument("synthetic profile needs at least one step");
  if (!(spec.min_voltage > 0.0 && spec.min_voltage < 1.0)) {
    throw InvalidArgument("target minimum voltage must lie in (0, 1)");
  }
  const auto phases = feeder.phases();
  const auto n = static_cast<Eigen::Index>(phases.size());
  const auto steps = static_cast<Eigen::Index>(spec.steps);
  Rng rng(derive_seed(spec.seed, {1}));

  Eigen::VectorXd base(n), tan_phi(n), pv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    base(i) = rng.uniform(0.2, 1.0);
    tan_phi(i) = std::tan(std::acos(rng.uniform(0.88, 0.98)));
    pv(i) = rng.uniform() < spec.solar_share ? rng.uniform(0.5, 1.5) * base(i) : 0.0;
  }

  constexpr double kDay = 1440.0;
  Eigen::MatrixXd load(steps, n), solar(steps, n);
  Eigen::VectorXd jitter = Eigen::VectorXd::Ones(n);
  double cloud = 1.0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const double minute = static_cast<double>(spec.start_minute) + static_cast<double>(t);
    const double shape = 0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * (minute - 480.0) / kDay);
    const double irradiance = std::max(0.0, std::sin(std::numbers::pi * (minute - 360.0) / 720.0));
    cloud = std::clamp(cloud + 0.02 * rng.normal(), 0.7, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      jitter(i) *= 1.0 + spec.load_variability * rng.normal();
      load(t, i) = base(i) * shape * jitter(i);
      solar(t, i) = pv(i) * irradiance * cloud;
    }
  }

  auto injections = [&](double scale) {
    Eigen::MatrixXcd s(steps, n);
    for (Eigen::Index t = 0; t < steps; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = scale * (solar(t, i) - load(t, i));
        const double q = -scale * load(t, i) * tan_phi(i);
        s(t, i) = Complex(p, q);
      }
    }
    return s;
  };

  const auto adm = assemble_admittance(feeder);
  // Infeasible loading counts as a voltage of zero.
  auto min_voltage = [&](double scale) {
    LoadProfile trial{phases, injections(scale), "1min"};
    try {
      const auto series = simulate_timeseries(adm, feeder.slack_voltage, trial);
      double lowest = std::numeric_limits<double>::infinity();
      for (const auto& st : series.states) lowest = std::min(lowest, st.v.cwiseAbs().minCoeff());
      return lowest;
    } catch (const Error&) {
      return 0.0;
    }
  };

  // Bisection on the load scale; voltages fall monotonically with loading here.
  double lo = 0.0;
  double hi = 1e-3;
  while (min_voltage(hi) > spec.min_voltage) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e3) throw NumericalError("could not reach the target minimum voltage");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (min_voltage(mid) > spec.min_voltage ? lo : hi) = mid;
  }
  return LoadProfile{phases, injections(lo), "1min"};
}

}  // namespace dsse

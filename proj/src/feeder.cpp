#include "dsse/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>

#include "dsse/error.hpp"

namespace dsse {

char phase_letter(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }

Phase phase_from_letter(char c) {
  switch (c) {
    case 'a': case 'A': return Phase::kA;
    case 'b': case 'B': return Phase::kB;
    case 'c': case 'C': return Phase::kC;
    default: break;
  }
  throw InvalidArgument(std::string("unknown phase letter '") + c + "'");
}

std::string PhaseId::label() const {
  return std::to_string(bus) + "." + phase_letter(phase);
}

PhaseId PhaseId::parse(const std::string& label) {
  const auto dot = label.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 2 != label.size()) {
    throw InvalidArgument("malformed phase label '" + label + "', expected bus.phase");
  }
  PhaseId id;
  try {
    std::size_t used = 0;
    id.bus = std::stoull(label.substr(0, dot), &used);
    if (used != dot) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw InvalidArgument("malformed bus index in phase label '" + label + "'");
  }
  id.phase = phase_from_letter(label[dot + 1]);
  return id;
}

const Bus& Feeder::bus(std::size_t index) const {
  for (const auto& b : buses) {
    if (b.index == index) return b;
  }
  throw InvalidArgument("feeder has no bus " + std::to_string(index));
}

bool Feeder::has_bus(std::size_t index) const {
  return std::any_of(buses.begin(), buses.end(),
                     [&](const Bus& b) { return b.index == index; });
}

std::vector<Phase> Feeder::line_phases(const Line& line) const {
  const auto& a = bus(line.from).phases;
  const auto& b = bus(line.to).phases;
  std::vector<Phase> shared;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(shared));
  return shared;
}

std::vector<PhaseId> Feeder::phases() const {
  std::vector<PhaseId> out;
  for (const auto& b : buses) {
    if (b.index == 0) continue;
    for (Phase p : b.phases) out.push_back({b.index, p});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t Feeder::phase_count() const { return phases().size(); }

std::size_t Feeder::total_phase_count() const {
  std::size_t total = 0;
  for (const auto& b : buses) total += b.phases.size();
  return total;
}

void validate(const Feeder& feeder) {
  std::map<std::size_t, const Bus*> by_index;
  for (const auto& b : feeder.buses) {
    if (!by_index.emplace(b.index, &b).second) {
      throw InvalidArgument("duplicate bus index " + std::to_string(b.index));
    }
    if (b.phases.empty()) {
      throw InvalidArgument("bus " + std::to_string(b.index) + " carries no phases");
    }
    if (!std::is_sorted(b.phases.begin(), b.phases.end()) ||
        std::adjacent_find(b.phases.begin(), b.phases.end()) != b.phases.end()) {
      throw InvalidArgument("bus " + std::to_string(b.index) +
                            " phases must be sorted and unique");
    }
  }
  auto slack = by_index.find(0);
  if (slack == by_index.end()) throw InvalidArgument("feeder has no slack bus 0");
  if (slack->second->phases.size() != 3) {
    throw InvalidArgument("slack bus 0 must carry phases a, b, c");
  }
  if (feeder.slack_voltage.size() != 3) {
    throw InvalidArgument("slack voltage must have three entries");
  }
  if (feeder.slack_voltage.cwiseAbs().maxCoeff() == 0.0) {
    throw InvalidArgument("slack voltage is zero");
  }
  if (!(feeder.base_power > 0.0) || !(feeder.base_voltage > 0.0)) {
    throw InvalidArgument("base power and base voltage must be positive");
  }

  for (const auto& line : feeder.lines) {
    if (!by_index.count(line.from) || !by_index.count(line.to)) {
      throw InvalidArgument("line " + std::to_string(line.from) + "-" +
                            std::to_string(line.to) + " references an undeclared bus");
    }
    if (line.from == line.to) {
      throw InvalidArgument("line connects bus " + std::to_string(line.from) + " to itself");
    }
    const auto shared = feeder.line_phases(line);
    const auto k = static_cast<Eigen::Index>(shared.size());
    if (k == 0 || line.impedance.rows() != k || line.impedance.cols() != k) {
      std::ostringstream msg;
      msg << "line " << line.from << "-" << line.to << " impedance is "
          << line.impedance.rows() << "x" << line.impedance.cols() << " but the endpoints share "
          << k << " phase(s)";
      throw InvalidArgument(msg.str());
    }
    const double scale = std::max(1.0, line.impedance.norm());
    if ((line.impedance - line.impedance.transpose()).norm() > 1e-12 * scale) {
      throw InvalidArgument("line " + std::to_string(line.from) + "-" +
                            std::to_string(line.to) + " impedance is not symmetric");
    }
  }

  // Radial and connected: n - 1 edges reaching every bus from the slack.
  std::map<std::size_t, std::vector<std::size_t>> adjacency;
  for (const auto& line : feeder.lines) {
    adjacency[line.from].push_back(line.to);
    adjacency[line.to].push_back(line.from);
  }
  std::map<std::size_t, bool> seen;
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const auto at = frontier.front();
    frontier.pop();
    for (auto next : adjacency[at]) {
      if (!seen[next]) {
        seen[next] = true;
        frontier.push(next);
      }
    }
  }
  for (const auto& b : feeder.buses) {
    if (!seen[b.index]) {
      throw InvalidArgument("feeder is disconnected: bus " + std::to_string(b.index) +
                            " is not reachable from the slack");
    }
  }
  if (feeder.buses.size() < 2 || feeder.lines.empty()) {
    throw InvalidArgument("feeder is disconnected: no lines");
  }
  if (feeder.lines.size() != feeder.buses.size() - 1) {
    throw InvalidArgument("feeder is not radial: " + std::to_string(feeder.lines.size()) +
                          " lines for " + std::to_string(feeder.buses.size()) + " buses");
  }
}

MultiphaseAdmittance::MultiphaseAdmittance(Eigen::MatrixXcd y00, Eigen::MatrixXcd y0l,
                                           Eigen::MatrixXcd yl0, Eigen::MatrixXcd yll,
                                           std::vector<PhaseId> ordering)
    : y00_(std::move(y00)),
      y0l_(std::move(y0l)),
      yl0_(std::move(yl0)),
      yll_(std::move(yll)),
      ordering_(std::move(ordering)) {
  const auto n = static_cast<Eigen::Index>(ordering_.size());
  const auto ns = y00_.rows();
  if (n == 0 || yll_.rows() != n || yll_.cols() != n || y00_.cols() != ns ||
      y0l_.rows() != ns || y0l_.cols() != n || yl0_.rows() != n || yl0_.cols() != ns) {
    throw InvalidArgument("admittance blocks have inconsistent dimensions");
  }
  lu_.compute(yll_);
  rcond_ = lu_.rcond();
  if (!(rcond_ >= kMinReciprocalCondition)) {
    std::ostringstream msg;
    msg << "YLL is singular or ill-conditioned (reciprocal condition " << rcond_ << ")";
    throw NumericalError(msg.str());
  }
}

Eigen::MatrixXcd MultiphaseAdmittance::full() const {
  const auto ns = y00_.rows();
  const auto n = yll_.rows();
  Eigen::MatrixXcd y(ns + n, ns + n);
  y << y00_, y0l_, yl0_, yll_;
  return y;
}

Eigen::VectorXcd MultiphaseAdmittance::solve(const Eigen::VectorXcd& rhs) const {
  return lu_.solve(rhs);
}

Eigen::MatrixXcd MultiphaseAdmittance::solve(const Eigen::MatrixXcd& rhs) const {
  return lu_.solve(rhs);
}

Eigen::VectorXcd MultiphaseAdmittance::no_load_voltage(const Eigen::VectorXcd& v0) const {
  if (v0.size() != yl0_.cols()) throw InvalidArgument("slack voltage has wrong dimension");
  return lu_.solve(-(yl0_ * v0));
}

MultiphaseAdmittance assemble_admittance(const Feeder& feeder) {
  validate(feeder);
  const auto ordering = feeder.phases();
  const auto n = static_cast<Eigen::Index>(ordering.size());
  constexpr Eigen::Index kSlack = 3;

  std::map<PhaseId, Eigen::Index> index;
  for (int p = 0; p < 3; ++p) index[{0, static_cast<Phase>(p)}] = p;
  for (Eigen::Index i = 0; i < n; ++i) index[ordering[static_cast<std::size_t>(i)]] = kSlack + i;

  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(kSlack + n, kSlack + n);
  for (const auto& line : feeder.lines) {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(line.impedance);
    if (!(lu.rcond() >= MultiphaseAdmittance::kMinReciprocalCondition)) {
      throw InvalidArgument("line " + std::to_string(line.from) + "-" +
                            std::to_string(line.to) + " has a singular impedance matrix");
    }
    Eigen::MatrixXcd branch = lu.inverse();
    branch = (0.5 * (branch + branch.transpose())).eval();

    const auto shared = feeder.line_phases(line);
    std::vector<Eigen::Index> from_idx, to_idx;
    for (Phase p : shared) {
      from_idx.push_back(index.at({line.from, p}));
      to_idx.push_back(index.at({line.to, p}));
    }
    for (std::size_t a = 0; a < shared.size(); ++a) {
      for (std::size_t b = 0; b < shared.size(); ++b) {
        const Complex yab = branch(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        y(from_idx[a], from_idx[b]) += yab;
        y(to_idx[a], to_idx[b]) += yab;
        y(from_idx[a], to_idx[b]) -= yab;
        y(to_idx[a], from_idx[b]) -= yab;
      }
    }
  }

  return MultiphaseAdmittance(y.topLeftCorner(kSlack, kSlack), y.topRightCorner(kSlack, n),
                              y.bottomLeftCorner(n, kSlack), y.bottomRightCorner(n, n),
                              ordering);
}

double power_flow_mismatch(const MultiphaseAdmittance& adm, const Eigen::VectorXcd& v,
                           const Eigen::VectorXcd& s, const Eigen::VectorXcd& v0) {
  const Eigen::VectorXcd current = adm.yll() * v + adm.yl0() * v0;
  const Eigen::VectorXcd computed = v.array() * current.array().conjugate();
  return (computed - s).cwiseAbs().maxCoeff();
}

StateVector solve_power_flow(const MultiphaseAdmittance& adm, const Eigen::VectorXcd& s,
                             const Eigen::VectorXcd& v0, const PowerFlowOptions& options) {
  const auto n = static_cast<Eigen::Index>(adm.size());
  if (s.size() != n) {
    throw InvalidArgument("injection vector has " + std::to_string(s.size()) +
                          " entries, expected " + std::to_string(n));
  }
  if (v0.size() != adm.yl0().cols() || v0.cwiseAbs().maxCoeff() == 0.0) {
    throw InvalidArgument("slack voltage must be nonzero with one entry per slack phase");
  }
  if (!s.allFinite()) throw InvalidArgument("injection vector has non-finite entries");
  if (s.cwiseAbs().maxCoeff() > options.max_injection) {
    std::ostringstream msg;
    msg << "injection magnitude " << s.cwiseAbs().maxCoeff() << " p.u. exceeds the loadability bound "
        << options.max_injection;
    throw InvalidArgument(msg.str());
  }

  const Eigen::VectorXcd bias = adm.yl0() * v0;
  StateVector state{adm.no_load_voltage(v0), s};
  for (std::size_t it = 0;; ++it) {
    const double mismatch = power_flow_mismatch(adm, state.v, s, v0);
    if (!std::isfinite(mismatch)) throw NumericalError("power flow diverged (non-finite mismatch)");
    if (mismatch <= options.tolerance) return state;
    if (it == options.max_iterations) {
      std::ostringstream msg;
      msg << "power flow did not converge in " << options.max_iterations
          << " iterations (mismatch " << mismatch << " p.u.); loading is likely infeasible";
      throw NumericalError(msg.str());
    }
    if (state.v.cwiseAbs().minCoeff() == 0.0) {
      throw NumericalError("power flow iterate reached a zero voltage");
    }
    const Eigen::VectorXcd rhs = (s.array() / state.v.array()).conjugate().matrix() - bias;
    state.v = adm.solve(rhs);
  }
}

LinearPowerFlowModel LinearPowerFlowModel::from_blocks(Eigen::MatrixXd a1, Eigen::MatrixXd a2,
                                                       Eigen::MatrixXd a3, Eigen::MatrixXd a4,
                                                       Eigen::MatrixXd c1, Eigen::MatrixXd c2,
                                                       Eigen::VectorXcd w,
                                                       std::vector<PhaseId> ordering) {
  const auto n = w.size();
  for (const auto* block : {&a1, &a2, &a3, &a4, &c1, &c2}) {
    if (block->rows() != n || block->cols() != n) {
      throw InvalidArgument("linear model block has wrong dimensions");
    }
  }
  if (static_cast<Eigen::Index>(ordering.size()) != n) {
    throw InvalidArgument("linear model ordering does not match its dimension");
  }
  LinearPowerFlowModel model;
  model.B.resize(n, 2 * n);
  model.B.leftCols(n).real() = a1;
  model.B.leftCols(n).imag() = a3;
  model.B.rightCols(n).real() = a2;
  model.B.rightCols(n).imag() = a4;
  model.C.resize(n, 2 * n);
  model.C << c1, c2;
  model.A1 = std::move(a1);
  model.A2 = std::move(a2);
  model.A3 = std::move(a3);
  model.A4 = std::move(a4);
  model.C1 = std::move(c1);
  model.C2 = std::move(c2);
  model.w = std::move(w);
  model.ordering = std::move(ordering);
  return model;
}

LinearPowerFlowModel LinearPowerFlowModel::from_sensitivity(const Eigen::MatrixXcd& g,
                                                            const Eigen::VectorXcd& w,
                                                            std::vector<PhaseId> ordering) {
  // v ~ w + G conj(s) = w + G Re(s) - j G Im(s)
  const Eigen::VectorXcd unit = w.array().conjugate() / w.array().abs().cast<Complex>();
  const Eigen::MatrixXcd dg = unit.asDiagonal() * g;
  return from_blocks(g.real(), g.imag(), g.imag(), -g.real(), dg.real(), dg.imag(), w,
                     std::move(ordering));
}

Eigen::VectorXd LinearPowerFlowModel::predict(const Eigen::VectorXcd& s) const {
  const auto n = w.size();
  if (s.size() != n) throw InvalidArgument("injection vector has wrong dimension");
  const Eigen::VectorXd p = s.real();
  const Eigen::VectorXd q = s.imag();
  Eigen::VectorXd out(3 * n);
  out.segment(0, n) = A1 * p + A2 * q + w.real();
  out.segment(n, n) = A3 * p + A4 * q + w.imag();
  out.segment(2 * n, n) = C1 * p + C2 * q + w.cwiseAbs();
  return out;
}

LinearPowerFlowModel linearize_power_flow(const MultiphaseAdmittance& adm,
                                          const Eigen::VectorXcd& v0) {
  const Eigen::VectorXcd w = adm.no_load_voltage(v0);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(std::abs(w(i)) > 0.0)) {
      throw InvalidArgument("no-load voltage is zero at phase " +
                            adm.ordering()[static_cast<std::size_t>(i)].label() +
                            " (no connection to the slack)");
    }
  }
  const auto n = w.size();
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd g = adm.solve(eye);
  for (Eigen::Index k = 0; k < n; ++k) g.col(k) /= std::conj(w(k));
  return LinearPowerFlowModel::from_sensitivity(g, w, adm.ordering());
}

StackedLinearModel::StackedLinearModel(const LinearPowerFlowModel& model, std::size_t steps)
    : steps_(steps) {
  if (steps == 0) throw InvalidArgument("number of time steps must be at least 1");
  const auto n = model.w.size();
  block_.resize(3 * n, 2 * n);
  block_ << model.A1, model.A2, model.A3, model.A4, model.C1, model.C2;
  offset_.resize(3 * n);
  offset_ << model.w.real(), model.w.imag(), model.w.cwiseAbs();
}

Eigen::MatrixXd StackedLinearModel::dense_matrix() const {
  const auto rows = block_.rows();
  const auto cols = block_.cols();
  const auto t = static_cast<Eigen::Index>(steps_);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows * t, cols * t);
  for (Eigen::Index k = 0; k < t; ++k) a.block(k * rows, k * cols, rows, cols) = block_;
  return a;
}

Eigen::VectorXd StackedLinearModel::dense_offset() const {
  return offset_.replicate(static_cast<Eigen::Index>(steps_), 1);
}

StackedLinearModel build_block_model(const LinearPowerFlowModel& model, std::size_t steps) {
  return StackedLinearModel(model, steps);
}

}  // namespace dsse

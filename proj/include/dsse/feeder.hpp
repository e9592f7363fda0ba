#pragma once

#include <compare>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dsse {

using Complex = std::complex<double>;

enum class Phase : std::uint8_t { kA = 0, kB = 1, kC = 2 };

char phase_letter(Phase p);
Phase phase_from_letter(char c);

// One phase of one bus. Ordered by bus index, then phase letter; this order
// fixes the column order of every matrix in the library.
struct PhaseId {
  std::size_t bus = 0;
  Phase phase = Phase::kA;

  auto operator<=>(const PhaseId&) const = default;

  // "12.b"
  std::string label() const;
  static PhaseId parse(const std::string& label);
};

struct Bus {
  std::size_t index = 0;
  std::vector<Phase> phases;  // sorted, unique
};

// Series branch. The impedance is over the phases shared by both endpoints,
// in phase-letter order, in per unit.
struct Line {
  std::size_t from = 0;
  std::size_t to = 0;
  Eigen::MatrixXcd impedance;
};

// Radial multiphase feeder. Bus 0 is the three-phase slack.
struct Feeder {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  Eigen::VectorXcd slack_voltage;  // over slack phases a, b, c; per unit
  double base_power = 1.0e6;      // VA
  double base_voltage = 4160.0;   // V

  const Bus& bus(std::size_t index) const;
  bool has_bus(std::size_t index) const;

  // Phases shared by the endpoints of `line`.
  std::vector<Phase> line_phases(const Line& line) const;

  // Non-slack phases in the global order.
  std::vector<PhaseId> phases() const;

  std::size_t phase_count() const;        // non-slack only
  std::size_t total_phase_count() const;  // including the slack phases
};

// Throws InvalidArgument when a structural invariant does not hold: missing or
// non-three-phase slack, duplicate buses, dangling lines, impedance shape,
// asymmetric impedance, disconnected or meshed topology.
void validate(const Feeder& feeder);

// Nodal admittance matrix partitioned into slack (0) and non-slack (L) blocks.
class MultiphaseAdmittance {
 public:
  // Minimum reciprocal condition number of YLL.
  static constexpr double kMinReciprocalCondition = 1e-12;

  // Builds from blocks. Throws NumericalError if YLL is too ill-conditioned.
  MultiphaseAdmittance(Eigen::MatrixXcd y00, Eigen::MatrixXcd y0l,
                       Eigen::MatrixXcd yl0, Eigen::MatrixXcd yll,
                       std::vector<PhaseId> ordering);

  const Eigen::MatrixXcd& y00() const { return y00_; }
  const Eigen::MatrixXcd& y0l() const { return y0l_; }
  const Eigen::MatrixXcd& yl0() const { return yl0_; }
  const Eigen::MatrixXcd& yll() const { return yll_; }
  const std::vector<PhaseId>& ordering() const { return ordering_; }
  std::size_t size() const { return ordering_.size(); }

  // [Y00 Y0L; YL0 YLL]
  Eigen::MatrixXcd full() const;

  double reciprocal_condition() const { return rcond_; }

  // YLL^{-1} * rhs using the cached factorization.
  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const;
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const;

  // No-load voltage w = -YLL^{-1} YL0 v0.
  Eigen::VectorXcd no_load_voltage(const Eigen::VectorXcd& v0) const;

 private:
  Eigen::MatrixXcd y00_, y0l_, yl0_, yll_;
  std::vector<PhaseId> ordering_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
  double rcond_ = 0.0;
};

MultiphaseAdmittance assemble_admittance(const Feeder& feeder);

struct StateVector {
  Eigen::VectorXcd v;  // voltage phasors, p.u.
  Eigen::VectorXcd s;  // net injections, p.u. (load is negative)
};

struct PowerFlowOptions {
  std::size_t max_iterations = 500;
  double tolerance = 1e-11;  // stop when the mismatch inf-norm drops below
  double max_injection = 5.0;  // loadability bound on |s_i|, p.u.
};

// max_i |v_i conj((YLL v + YL0 v0)_i) - s_i|
double power_flow_mismatch(const MultiphaseAdmittance& adm,
                           const Eigen::VectorXcd& v, const Eigen::VectorXcd& s,
                           const Eigen::VectorXcd& v0);

// Fixed-point (Z-bus) iteration v <- YLL^{-1}(conj(s ./ v) - YL0 v0) started at
// the no-load voltage. Throws NumericalError on non-convergence or a zero
// voltage, InvalidArgument on bad dimensions or loading beyond the bound.
StateVector solve_power_flow(const MultiphaseAdmittance& adm,
                             const Eigen::VectorXcd& s,
                             const Eigen::VectorXcd& v0,
                             const PowerFlowOptions& options = {});

// First-order model around the no-load voltage w:
//   v   ~ B [Re s; Im s] + w
//   |v| ~ C [Re s; Im s] + |w|
struct LinearPowerFlowModel {
  Eigen::MatrixXcd B;  // n x 2n
  Eigen::MatrixXd C;   // n x 2n
  Eigen::VectorXcd w;
  Eigen::MatrixXd A1, A2, A3, A4, C1, C2;  // n x n
  std::vector<PhaseId> ordering;

  std::size_t size() const { return static_cast<std::size_t>(w.size()); }

  // Builds B, C and the real blocks from G = YLL^{-1} diag(conj(w))^{-1}.
  static LinearPowerFlowModel from_sensitivity(const Eigen::MatrixXcd& g,
                                               const Eigen::VectorXcd& w,
                                               std::vector<PhaseId> ordering);

  // Rebuilds B and C from the six real blocks (used by the CSV import).
  static LinearPowerFlowModel from_blocks(Eigen::MatrixXd a1, Eigen::MatrixXd a2,
                                          Eigen::MatrixXd a3, Eigen::MatrixXd a4,
                                          Eigen::MatrixXd c1, Eigen::MatrixXd c2,
                                          Eigen::VectorXcd w,
                                          std::vector<PhaseId> ordering);

  // Stacked [Re v; Im v; |v|] predicted for injection s.
  Eigen::VectorXd predict(const Eigen::VectorXcd& s) const;
};

// Name recorded in outputs for the linearization variant in use.
inline constexpr const char* kLinearizationVariant = "no-load fixed-point";

LinearPowerFlowModel linearize_power_flow(const MultiphaseAdmittance& adm,
                                          const Eigen::VectorXcd& v0);

// Block-diagonal time-stacked model y ~ A x + b over T snapshots. Only the
// repeated diagonal block is stored; dense() materializes A.
class StackedLinearModel {
 public:
  StackedLinearModel(const LinearPowerFlowModel& model, std::size_t steps);

  std::size_t steps() const { return steps_; }
  std::size_t phases() const { return static_cast<std::size_t>(offset_.size() / 3); }

  // [A1 A2; A3 A4; C1 C2], 3n x 2n.
  const Eigen::MatrixXd& block() const { return block_; }
  // [Re w; Im w; |w|], 3n.
  const Eigen::VectorXd& block_offset() const { return offset_; }

  Eigen::MatrixXd dense_matrix() const;  // 3Tn x 2Tn
  Eigen::VectorXd dense_offset() const;  // 3Tn

 private:
  Eigen::MatrixXd block_;
  Eigen::VectorXd offset_;
  std::size_t steps_;
};

StackedLinearModel build_block_model(const LinearPowerFlowModel& model,
                                     std::size_t steps);

}  // namespace dsse

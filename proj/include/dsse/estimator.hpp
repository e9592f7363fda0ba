#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsse/feeder.hpp"
#include "dsse/measurement.hpp"

namespace dsse {

// Row selectors of the completion objective. y-rows are Re v, Im v, |v| of
// each time block; x-rows are Re s, Im s. Indices are zero-based.
struct SelectorMaps {
  explicit SelectorMaps(std::size_t steps);

  std::size_t steps;
  std::vector<std::size_t> y_rows;  // 3T
  std::vector<std::size_t> x_rows;  // 2T

  std::size_t rows() const { return kRowsPerStep * steps; }
};

// Selected rows of X, each transposed and concatenated in row order.
Eigen::VectorXd select_y(const Eigen::MatrixXd& x, const SelectorMaps& maps);
Eigen::VectorXd select_x(const Eigen::MatrixXd& x, const SelectorMaps& maps);

struct FactorPair {
  Eigen::MatrixXd u;  // m x r
  Eigen::MatrixXd v;  // r x n

  std::size_t rank() const { return static_cast<std::size_t>(u.cols()); }
  Eigen::MatrixXd product() const { return u * v; }
};

enum class SubproblemMethod {
  kDirect,             // dense Cholesky of the normal equations
  kConjugateGradient,  // Jacobi-preconditioned CG on the same system
};

const char* to_string(SubproblemMethod method);
SubproblemMethod subproblem_method_from_string(const std::string& name);

struct EstimatorConfig {
  std::size_t rank = 4;
  double mu = 100.0;   // data fidelity weight
  double nu = 10.0;    // linear power-flow weight
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // relative objective change
  bool early_stop = true;   // false runs exactly max_iterations
  SubproblemMethod method = SubproblemMethod::kDirect;
  // kDirect switches to CG for systems larger than this.
  std::size_t cg_threshold = 6000;

  void validate() const;
};

struct IterationRecord {
  double objective_after_u = 0.0;  // f(U_k, V_{k-1})
  double objective = 0.0;          // f(U_k, V_k)
  double step_u = 0.0;             // ||U_k - U_{k-1}||_F
  double step_v = 0.0;             // ||V_k - V_{k-1}||_F
  double seconds = 0.0;
};

struct IterationTrace {
  double initial_objective = 0.0;  // f(U_0, V_0)
  std::vector<IterationRecord> iterations;

  // Largest relative increase seen over all half steps (<= 0 when monotone).
  double worst_relative_increase() const;
  // Sum of ||dU|| + ||dV|| from iteration k (zero-based) onward.
  std::vector<double> tail_step_sums() const;
};

// Voltage magnitude (p.u.) and angle (degrees), T x n.
struct PhaseEstimates {
  Eigen::MatrixXd magnitude;
  Eigen::MatrixXd angle_deg;
};

struct EstimateResult {
  Eigen::MatrixXd x;  // U V
  FactorPair factors;
  PhaseEstimates state;
  IterationTrace trace;
  EstimatorConfig config;
  bool converged = false;  // stopped on the tolerance rather than the cap
  double seconds = 0.0;
};

// The linear power-flow term, split into its n x n blocks K_il with the Gram
// products needed by both subproblems. Independent of T, so one instance can
// serve every problem on the same feeder.
class PowerFlowPenalty {
 public:
  explicit PowerFlowPenalty(const StackedLinearModel& model);

  std::size_t phases() const { return static_cast<std::size_t>(block_.cols() / 2); }

  // [A1 A2; A3 A4; C1 C2] and [Re w; Im w; |w|]
  const Eigen::MatrixXd& block() const { return block_; }
  const Eigen::VectorXd& block_offset() const { return offset_; }

  // K_il for i in {Re v, Im v, |v|}, l in {P, Q}.
  Eigen::Map<const Eigen::MatrixXd> k(int i, int l) const { return basis_matrix(2 * i + l); }
  const Eigen::VectorXd& offset(int i) const { return offsets_[static_cast<std::size_t>(i)]; }
  // S_ll' = sum_i K_il^T K_il'
  Eigen::Map<const Eigen::MatrixXd> gram(int l, int lp) const { return basis_matrix(6 + 2 * l + lp); }
  // h_l = sum_i K_il^T b_i
  const Eigen::VectorXd& gram_offset(int l) const { return gram_offset_[static_cast<std::size_t>(l)]; }

  // Columns are vec(K_00), ..., vec(K_21), vec(S_00), ..., vec(S_11).
  const Eigen::MatrixXd& basis() const { return basis_; }

  // |f1(X) - (A f2(X) + b)|^2 for a 5T x n matrix.
  double residual_norm_squared(const Eigen::MatrixXd& x) const;

 private:
  Eigen::Map<const Eigen::MatrixXd> basis_matrix(Eigen::Index c) const {
    const auto n = static_cast<Eigen::Index>(phases());
    return {basis_.col(c).data(), n, n};
  }

  Eigen::MatrixXd block_;
  Eigen::VectorXd offset_;
  Eigen::MatrixXd basis_;
  std::array<Eigen::VectorXd, 3> offsets_;
  std::array<Eigen::VectorXd, 2> gram_offset_;
};

// Objective data shared across subproblem solves: the measurements, the known
// set by row and by column, and the power-flow penalty.
class CompletionProblem {
 public:
  CompletionProblem(const MeasurementMatrix& m, const ObservationMask& mask,
                    const StackedLinearModel& model);
  CompletionProblem(const MeasurementMatrix& m, const ObservationMask& mask,
                    std::shared_ptr<const PowerFlowPenalty> penalty);

  std::size_t rows() const { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(m_.cols()); }
  std::size_t steps() const { return steps_; }
  const ObservationMask& mask() const { return mask_; }
  const Eigen::MatrixXd& measurements() const { return m_; }

  // 1/2 (|U|^2 + |V|^2) + mu/2 |P(UV - M)|^2 + nu/2 |f1(UV) - (A f2(UV) + b)|^2
  double objective(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, double mu,
                   double nu) const;

  // The three terms separately: regularizer, data fidelity, power flow.
  std::array<double, 3> objective_terms(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                        double mu, double nu) const;

  // |f1(X) - (A f2(X) + b)|^2
  double constraint_residual(const Eigen::MatrixXd& x) const;

  // Exact minimizers of the objective over U (resp. V) with the other fixed.
  // `guess` seeds CG when that method is used.
  Eigen::MatrixXd solve_u(const Eigen::MatrixXd& v, double mu, double nu,
                          SubproblemMethod method = SubproblemMethod::kDirect,
                          std::size_t cg_threshold = 6000) const;
  Eigen::MatrixXd solve_v(const Eigen::MatrixXd& u, double mu, double nu,
                          SubproblemMethod method = SubproblemMethod::kDirect,
                          std::size_t cg_threshold = 6000,
                          const Eigen::MatrixXd* guess = nullptr) const;

 private:
  Eigen::MatrixXd m_;
  ObservationMask mask_;
  std::size_t steps_;
  std::vector<std::vector<Eigen::Index>> row_cols_;  // observed columns per row
  std::vector<std::vector<Eigen::Index>> col_rows_;  // observed rows per column
  std::shared_ptr<const PowerFlowPenalty> penalty_;
};

double evaluate_objective(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                          const MeasurementMatrix& m, const ObservationMask& mask,
                          const StackedLinearModel& model, double mu, double nu);

// Rank-r SVD of P_Omega(M): U0 = U_r S^{1/2}, V0 = S^{1/2} V_r^T.
FactorPair initialize_factors(const MeasurementMatrix& m, const ObservationMask& mask,
                              std::size_t rank);

Eigen::MatrixXd solve_u_step(const Eigen::MatrixXd& v, const MeasurementMatrix& m,
                             const ObservationMask& mask, const StackedLinearModel& model,
                             double mu, double nu,
                             SubproblemMethod method = SubproblemMethod::kDirect);

Eigen::MatrixXd solve_v_step(const Eigen::MatrixXd& u, const MeasurementMatrix& m,
                             const ObservationMask& mask, const StackedLinearModel& model,
                             double mu, double nu,
                             SubproblemMethod method = SubproblemMethod::kDirect);

EstimateResult run_alternating_minimization(const MeasurementMatrix& m,
                                            const ObservationMask& mask,
                                            const StackedLinearModel& model,
                                            const EstimatorConfig& config);

// Same, reusing a precomputed penalty.
EstimateResult run_alternating_minimization(const MeasurementMatrix& m,
                                            const ObservationMask& mask,
                                            std::shared_ptr<const PowerFlowPenalty> penalty,
                                            const EstimatorConfig& config);

// Proximal gradient on the unconstrained nuclear-norm model: gradient step of
// length 1/mu on the fidelity term, then singular-value soft-thresholding at
// 1/mu. Starts from X = 0.
Eigen::MatrixXd svt_complete(const MeasurementMatrix& m, const ObservationMask& mask,
                             double mu, std::size_t steps);

PhaseEstimates extract_state(const Eigen::MatrixXd& x, const SelectorMaps& maps);

}  // namespace dsse

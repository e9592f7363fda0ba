#include "dsse/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

#include "dsse/error.hpp"

namespace dsse {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Relative gradient tolerance of the subproblem solves.
constexpr double kGradientTolerance = 1e-8;
constexpr int kRefinementSteps = 3;
constexpr double kBackwardErrorFactor = 64.0;

// Solves the SPD system h x = rhs to the gradient tolerance. h holds the full
// symmetric matrix.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs,
                          bool use_cg, const Eigen::VectorXd* guess, const char* what) {
  Eigen::VectorXd x;
  const double h_norm = h.norm();
  const double rhs_norm = rhs.norm();
  // Never ask for less than a small multiple of the backward-error floor.
  auto residual_ok = [&](const Eigen::VectorXd& sol, double* out) {
    const double r = (h * sol - rhs).norm();
    if (out) *out = r;
    const double floor = kBackwardErrorFactor * std::numeric_limits<double>::epsilon() *
                         (h_norm * sol.norm() + rhs_norm);
    return r <= std::max(kGradientTolerance * (1.0 + sol.norm()), floor);
  };
  double residual = 0.0;

  if (!use_cg) {
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) {
      throw NumericalError(std::string(what) + " normal equations are not positive definite");
    }
    x = llt.solve(rhs);
    for (int i = 0; i < kRefinementSteps && !residual_ok(x, &residual); ++i) {
      x += llt.solve(rhs - h * x);
    }
  } else {
    Eigen::ConjugateGradient<Eigen::MatrixXd, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-14);
    cg.setMaxIterations(std::max<Eigen::Index>(200, 10 * h.rows()));
    cg.compute(h);
    if (guess && guess->size() == rhs.size()) {
      x = cg.solveWithGuess(rhs, *guess);
    } else {
      x = cg.solve(rhs);
    }
    for (int i = 0; i < kRefinementSteps && !residual_ok(x, &residual); ++i) {
      x += cg.solve(rhs - h * x);
    }
  }
  if (!x.allFinite()) throw NumericalError(std::string(what) + " solve produced non-finite values");
  if (!residual_ok(x, &residual)) {
    std::ostringstream msg;
    msg << what << " normal equations are too ill-conditioned: gradient norm " << residual
        << " after refinement (check the mu/nu scaling)";
    throw NumericalError(msg.str());
  }
  return x;
}

void check_factor_dims(const MeasurementMatrix& m, const ObservationMask& mask) {
  if (m.values.rows() != static_cast<Eigen::Index>(kRowsPerStep * m.steps) || m.steps == 0) {
    throw InvalidArgument("measurement matrix must have 5T rows");
  }
  if (mask.rows != m.rows() || mask.cols != m.cols()) {
    throw InvalidArgument("mask dimensions do not match the measurement matrix");
  }
}

}  // namespace

SelectorMaps::SelectorMaps(std::size_t steps_) : steps(steps_) {
  if (steps == 0) throw InvalidArgument("selector maps need T >= 1");
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < 3; ++i) y_rows.push_back(kRowsPerStep * t + i);
    for (std::size_t i = 0; i < 2; ++i) x_rows.push_back(kRowsPerStep * t + 3 + i);
  }
}

namespace {
Eigen::VectorXd stack_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows,
                           std::size_t expected_rows) {
  if (static_cast<std::size_t>(x.rows()) != expected_rows) {
    throw InvalidArgument("matrix has " + std::to_string(x.rows()) + " rows, selector expects " +
                          std::to_string(expected_rows));
  }
  const auto n = x.cols();
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()) * n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.segment(static_cast<Eigen::Index>(k) * n, n) =
        x.row(static_cast<Eigen::Index>(rows[k])).transpose();
  }
  return out;
}
}  // namespace

Eigen::VectorXd select_y(const Eigen::MatrixXd& x, const SelectorMaps& maps) {
  return stack_rows(x, maps.y_rows, maps.rows());
}

Eigen::VectorXd select_x(const Eigen::MatrixXd& x, const SelectorMaps& maps) {
  return stack_rows(x, maps.x_rows, maps.rows());
}

const char* to_string(SubproblemMethod method) {
  switch (method) {
    case SubproblemMethod::kDirect: return "direct";
    case SubproblemMethod::kConjugateGradient: return "cg";
  }
  return "unknown";
}

SubproblemMethod subproblem_method_from_string(const std::string& name) {
  if (name == "direct") return SubproblemMethod::kDirect;
  if (name == "cg") return SubproblemMethod::kConjugateGradient;
  throw InvalidArgument("unknown subproblem method '" + name + "' (expected direct or cg)");
}

void EstimatorConfig::validate() const {
  if (rank == 0) throw InvalidArgument("rank must be at least 1");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidArgument("mu must be finite and >= 0");
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw InvalidArgument("nu must be finite and >= 0");
  if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be > 0");
  if (max_iterations == 0) throw InvalidArgument("max_iterations must be at least 1");
}

double IterationTrace::worst_relative_increase() const {
  double worst = -std::numeric_limits<double>::infinity();
  double prev = initial_objective;
  for (const auto& rec : iterations) {
    for (double next : {rec.objective_after_u, rec.objective}) {
      const double scale = std::max(std::abs(prev), std::numeric_limits<double>::min());
      worst = std::max(worst, (next - prev) / scale);
      prev = next;
    }
  }
  return worst;
}

std::vector<double> IterationTrace::tail_step_sums() const {
  std::vector<double> tail(iterations.size() + 1, 0.0);
  for (std::size_t k = iterations.size(); k-- > 0;) {
    tail[k] = tail[k + 1] + iterations[k].step_u + iterations[k].step_v;
  }
  tail.pop_back();
  return tail;
}

PowerFlowPenalty::PowerFlowPenalty(const StackedLinearModel& model)
    : block_(model.block()), offset_(model.block_offset()) {
  const auto n = static_cast<Eigen::Index>(model.phases());
  basis_.resize(n * n, 10);
  auto slot = [&](Eigen::Index c) { return Eigen::Map<Eigen::MatrixXd>(basis_.col(c).data(), n, n); };
  for (int i = 0; i < 3; ++i) {
    offsets_[static_cast<std::size_t>(i)] = offset_.segment(i * n, n);
    for (int l = 0; l < 2; ++l) slot(2 * i + l) = block_.block(i * n, l * n, n, n);
  }
  Eigen::MatrixXd ktk(2 * n, 2 * n);
  ktk.setZero();
  ktk.selfadjointView<Eigen::Lower>().rankUpdate(block_.transpose());
  ktk.triangularView<Eigen::StrictlyUpper>() = ktk.transpose();
  const Eigen::VectorXd ktb = block_.transpose() * offset_;
  for (int l = 0; l < 2; ++l) {
    gram_offset_[static_cast<std::size_t>(l)] = ktb.segment(l * n, n);
    for (int lp = 0; lp < 2; ++lp) slot(6 + 2 * l + lp) = ktk.block(l * n, lp * n, n, n);
  }
}

double PowerFlowPenalty::residual_norm_squared(const Eigen::MatrixXd& x) const {
  const auto n = static_cast<Eigen::Index>(phases());
  if (x.cols() != n || x.rows() % 5 != 0) {
    throw InvalidArgument("matrix is not conformable with the linear model");
  }
  double total = 0.0;
  Eigen::VectorXd y(3 * n), s(2 * n);
  for (Eigen::Index base = 0; base < x.rows(); base += 5) {
    for (int i = 0; i < 3; ++i) y.segment(i * n, n) = x.row(base + i).transpose();
    for (int l = 0; l < 2; ++l) s.segment(l * n, n) = x.row(base + 3 + l).transpose();
    total += (y - block_ * s - offset_).squaredNorm();
  }
  return total;
}

CompletionProblem::CompletionProblem(const MeasurementMatrix& m, const ObservationMask& mask,
                                     const StackedLinearModel& model)
    : CompletionProblem(m, mask, std::make_shared<const PowerFlowPenalty>(model)) {
  if (model.steps() != m.steps) {
    throw InvalidArgument("linear model has " + std::to_string(model.steps()) +
                          " steps, measurements have " + std::to_string(m.steps));
  }
}

CompletionProblem::CompletionProblem(const MeasurementMatrix& m, const ObservationMask& mask,
                                     std::shared_ptr<const PowerFlowPenalty> penalty)
    : m_(m.values), mask_(mask), steps_(m.steps), penalty_(std::move(penalty)) {
  check_factor_dims(m, mask);
  if (!penalty_ || penalty_->phases() != m.cols()) {
    throw InvalidArgument("linear model has " + std::to_string(penalty_ ? penalty_->phases() : 0) +
                          " phases, measurements have " + std::to_string(m.cols()));
  }
  row_cols_.resize(rows());
  col_rows_.resize(cols());
  for (const auto& [r, c] : mask_.entries) {
    if (r >= rows() || c >= cols()) throw InvalidArgument("mask entry out of range");
    row_cols_[r].push_back(static_cast<Eigen::Index>(c));
    col_rows_[c].push_back(static_cast<Eigen::Index>(r));
  }
}

double CompletionProblem::constraint_residual(const Eigen::MatrixXd& x) const {
  return penalty_->residual_norm_squared(x);
}

std::array<double, 3> CompletionProblem::objective_terms(const Eigen::MatrixXd& u,
                                                          const Eigen::MatrixXd& v, double mu,
                                                          double nu) const {
  if (u.rows() != m_.rows() || v.cols() != m_.cols() || u.cols() != v.rows()) {
    throw InvalidArgument("factor dimensions are not conformable with the measurements");
  }
  const Eigen::MatrixXd x = u * v;
  double data = 0.0;
  for (const auto& [r, c] : mask_.entries) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto j = static_cast<Eigen::Index>(c);
    const double d = x(i, j) - m_(i, j);
    data += d * d;
  }
  const double pf = nu == 0.0 ? 0.0 : penalty_->residual_norm_squared(x);
  return {0.5 * (u.squaredNorm() + v.squaredNorm()), 0.5 * mu * data, 0.5 * nu * pf};
}

double CompletionProblem::objective(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                    double mu, double nu) const {
  const auto terms = objective_terms(u, v, mu, nu);
  return terms[0] + terms[1] + terms[2];
}

// Row-stacked U within time block t: u_t = [U_{5t}; ...; U_{5t+4}] (5r). The
// power-flow residual of block t is J u_t - b with J = [Vt Vt Vt -K.(Vt) ...],
// identical across t, so J^T J and J^T b are formed once per solve.
Eigen::MatrixXd CompletionProblem::solve_u(const Eigen::MatrixXd& v, double mu, double nu,
                                           SubproblemMethod method,
                                           std::size_t cg_threshold) const {
  if (v.cols() != m_.cols() || v.rows() == 0) {
    throw InvalidArgument("V must be r x n with n = number of columns of M");
  }
  const auto r = v.rows();
  const auto block_size = 5 * r;

  Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(block_size, block_size);
  Eigen::VectorXd jtb = Eigen::VectorXd::Zero(block_size);
  if (nu != 0.0) {
    const Eigen::MatrixXd vvt = v * v.transpose();
    const Eigen::MatrixXd vt = v.transpose();
    for (int i = 0; i < 3; ++i) {
      jtj.block(i * r, i * r, r, r) = vvt;
      jtb.segment(i * r, r) = v * penalty_->offset(i);
      for (int l = 0; l < 2; ++l) {
        const Eigen::MatrixXd w = v * (penalty_->k(i, l) * vt);
        jtj.block(i * r, (3 + l) * r, r, r) = -w;
        jtj.block((3 + l) * r, i * r, r, r) = -w.transpose();
      }
    }
    for (int l = 0; l < 2; ++l) {
      jtb.segment((3 + l) * r, r) = -(v * penalty_->gram_offset(l));
      for (int lp = 0; lp < 2; ++lp) {
        jtj.block((3 + l) * r, (3 + lp) * r, r, r) = v * (penalty_->gram(l, lp) * vt);
      }
    }
    jtj = (0.5 * (jtj + jtj.transpose())).eval();
    jtj *= nu;
    jtb *= nu;
  }

  const bool use_cg = method == SubproblemMethod::kConjugateGradient ||
                      static_cast<std::size_t>(block_size) > cg_threshold;
  Eigen::MatrixXd u(m_.rows(), r);
  for (std::size_t t = 0; t < steps_; ++t) {
    Eigen::MatrixXd h = jtj;
    h.diagonal().array() += 1.0;
    Eigen::VectorXd rhs = jtb;
    for (Eigen::Index i = 0; i < 5; ++i) {
      const auto row = static_cast<Eigen::Index>(5 * t) + i;
      auto hb = h.block(i * r, i * r, r, r);
      auto rb = rhs.segment(i * r, r);
      for (auto j : row_cols_[static_cast<std::size_t>(row)]) {
        hb.noalias() += mu * v.col(j) * v.col(j).transpose();
        rb.noalias() += (mu * m_(row, j)) * v.col(j);
      }
    }
    const Eigen::VectorXd sol = solve_spd(h, rhs, use_cg, nullptr, "U-step");
    for (Eigen::Index i = 0; i < 5; ++i) {
      u.row(static_cast<Eigen::Index>(5 * t) + i) = sol.segment(i * r, r).transpose();
    }
  }
  return u;
}

// Row-stacked V: v~ = [V_0^T; ...; V_{r-1}^T] (rn). The data term is block
// diagonal per column; the power-flow term couples columns through K.
Eigen::MatrixXd CompletionProblem::solve_v(const Eigen::MatrixXd& u, double mu, double nu,
                                           SubproblemMethod method, std::size_t cg_threshold,
                                           const Eigen::MatrixXd* guess) const {
  if (u.rows() != m_.rows() || u.cols() == 0) {
    throw InvalidArgument("U must be m x r with m = number of rows of M");
  }
  const auto r = u.cols();
  const auto n = m_.cols();
  const auto size = r * n;

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size, size);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);

  if (nu != 0.0) {
    // Time-aggregated coefficients of the Kronecker expansion of sum_t J_t^T J_t.
    Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(r, r);
    std::array<Eigen::MatrixXd, 6> beta;   // beta_il(k, k') = sum_t P_ik Q_lk'
    std::array<Eigen::MatrixXd, 4> gamma;  // gamma_ll'(k, k') = sum_t Q_lk Q_l'k'
    for (auto& b : beta) b = Eigen::MatrixXd::Zero(r, r);
    for (auto& g : gamma) g = Eigen::MatrixXd::Zero(r, r);
    Eigen::MatrixXd p_sum = Eigen::MatrixXd::Zero(3, r);
    Eigen::MatrixXd q_sum = Eigen::MatrixXd::Zero(2, r);
    for (std::size_t t = 0; t < steps_; ++t) {
      const auto base = static_cast<Eigen::Index>(5 * t);
      const auto p = u.middleRows(base, 3);
      const auto q = u.middleRows(base + 3, 2);
      alpha.noalias() += p.transpose() * p;
      p_sum += p;
      q_sum += q;
      for (int i = 0; i < 3; ++i) {
        for (int l = 0; l < 2; ++l) {
          beta[static_cast<std::size_t>(2 * i + l)].noalias() += p.row(i).transpose() * q.row(l);
        }
      }
      for (int l = 0; l < 2; ++l) {
        for (int lp = 0; lp < 2; ++lp) {
          gamma[static_cast<std::size_t>(2 * l + lp)].noalias() += q.row(l).transpose() * q.row(lp);
        }
      }
    }

    // Every block is a combination of the same ten matrices, so all of them
    // come out of one product with the vectorized basis. Column 2p holds the
    // forward part of pair p, column 2p+1 the part that enters transposed.
    const Eigen::Index pairs = r * (r + 1) / 2;
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(10, 2 * pairs);
    Eigen::Index p = 0;
    for (Eigen::Index k = 0; k < r; ++k) {
      for (Eigen::Index kp = k; kp < r; ++kp, ++p) {
        for (int c = 0; c < 6; ++c) {
          coef(c, 2 * p) = -beta[static_cast<std::size_t>(c)](k, kp);
          coef(c, 2 * p + 1) = -beta[static_cast<std::size_t>(c)](kp, k);
        }
        for (int c = 0; c < 4; ++c) coef(6 + c, 2 * p) = gamma[static_cast<std::size_t>(c)](k, kp);
      }
    }
    coef *= nu;
    const Eigen::MatrixXd combos = penalty_->basis() * coef;
    p = 0;
    for (Eigen::Index k = 0; k < r; ++k) {
      for (Eigen::Index kp = k; kp < r; ++kp, ++p) {
        const Eigen::Map<const Eigen::MatrixXd> fwd(combos.col(2 * p).data(), n, n);
        const Eigen::Map<const Eigen::MatrixXd> bwd(combos.col(2 * p + 1).data(), n, n);
        auto blk = h.block(k * n, kp * n, n, n);
        blk.noalias() = fwd + bwd.transpose();
        blk.diagonal().array() += nu * alpha(k, kp);
        if (kp != k) h.block(kp * n, k * n, n, n) = blk.transpose();
      }
    }
    for (Eigen::Index k = 0; k < r; ++k) {
      auto rk = rhs.segment(k * n, n);
      for (int i = 0; i < 3; ++i) rk += (nu * p_sum(i, k)) * penalty_->offset(i);
      for (int l = 0; l < 2; ++l) rk -= (nu * q_sum(l, k)) * penalty_->gram_offset(l);
    }
    // Diagonal blocks are symmetric only up to rounding.
    for (Eigen::Index k = 0; k < r; ++k) {
      auto blk = h.block(k * n, k * n, n, n);
      blk = (0.5 * (blk + blk.transpose())).eval();
    }
  }

  h.diagonal().array() += 1.0;
  if (mu != 0.0) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (auto i : col_rows_[static_cast<std::size_t>(j)]) {
        for (Eigen::Index k = 0; k < r; ++k) {
          rhs(k * n + j) += mu * u(i, k) * m_(i, j);
          for (Eigen::Index kp = 0; kp < r; ++kp) {
            h(k * n + j, kp * n + j) += mu * u(i, k) * u(i, kp);
          }
        }
      }
    }
  }

  const bool use_cg = method == SubproblemMethod::kConjugateGradient ||
                      static_cast<std::size_t>(size) > cg_threshold;
  Eigen::VectorXd start;
  if (guess && guess->rows() == r && guess->cols() == n) {
    start = Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd(guess->transpose()).data(), size);
  }
  const Eigen::VectorXd sol = solve_spd(h, rhs, use_cg, start.size() ? &start : nullptr, "V-step");
  return Eigen::Map<const Eigen::MatrixXd>(sol.data(), n, r).transpose();
}

double evaluate_objective(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                          const MeasurementMatrix& m, const ObservationMask& mask,
                          const StackedLinearModel& model, double mu, double nu) {
  return CompletionProblem(m, mask, model).objective(u, v, mu, nu);
}

FactorPair initialize_factors(const MeasurementMatrix& m, const ObservationMask& mask,
                              std::size_t rank) {
  check_factor_dims(m, mask);
  const auto limit = std::min(m.rows(), m.cols());
  if (rank == 0 || rank > limit) {
    throw InvalidArgument("rank " + std::to_string(rank) + " must lie in [1, " +
                          std::to_string(limit) + "]");
  }
  if (mask.empty()) throw InvalidArgument("cannot initialize from an empty known set");

  const Eigen::MatrixXd observed = project_observed(m.values, mask);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(observed, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto r = static_cast<Eigen::Index>(rank);
  const Eigen::VectorXd root = svd.singularValues().head(r).cwiseSqrt();
  FactorPair f;
  f.u = svd.matrixU().leftCols(r) * root.asDiagonal();
  f.v = root.asDiagonal() * svd.matrixV().leftCols(r).transpose();
  return f;
}

Eigen::MatrixXd solve_u_step(const Eigen::MatrixXd& v, const MeasurementMatrix& m,
                             const ObservationMask& mask, const StackedLinearModel& model,
                             double mu, double nu, SubproblemMethod method) {
  return CompletionProblem(m, mask, model).solve_u(v, mu, nu, method);
}

Eigen::MatrixXd solve_v_step(const Eigen::MatrixXd& u, const MeasurementMatrix& m,
                             const ObservationMask& mask, const StackedLinearModel& model,
                             double mu, double nu, SubproblemMethod method) {
  return CompletionProblem(m, mask, model).solve_v(u, mu, nu, method);
}

EstimateResult run_alternating_minimization(const MeasurementMatrix& m,
                                            const ObservationMask& mask,
                                            const StackedLinearModel& model,
                                            const EstimatorConfig& config) {
  if (model.steps() != m.steps) {
    throw InvalidArgument("linear model has " + std::to_string(model.steps()) +
                          " steps, measurements have " + std::to_string(m.steps));
  }
  return run_alternating_minimization(m, mask, std::make_shared<const PowerFlowPenalty>(model),
                                      config);
}

EstimateResult run_alternating_minimization(const MeasurementMatrix& m,
                                            const ObservationMask& mask,
                                            std::shared_ptr<const PowerFlowPenalty> penalty,
                                            const EstimatorConfig& config) {
  config.validate();
  const auto start = Clock::now();
  const CompletionProblem problem(m, mask, std::move(penalty));
  const SelectorMaps maps(m.steps);

  EstimateResult result;
  result.config = config;
  FactorPair f = initialize_factors(m, mask, config.rank);

  auto checked = [&](double value, double previous, const char* stage, std::size_t k) {
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "objective became non-finite after the " << stage << " of iteration " << k;
      throw NumericalError(msg.str());
    }
    const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
    if (value - previous > 1e-9 * scale) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "objective increased from " << previous << " to " << value << " in the " << stage
          << " of iteration " << k;
      throw InternalError(msg.str());
    }
    return value;
  };

  double previous = problem.objective(f.u, f.v, config.mu, config.nu);
  if (!std::isfinite(previous)) throw NumericalError("initial objective is non-finite");
  result.trace.initial_objective = previous;

  for (std::size_t k = 1; k <= config.max_iterations; ++k) {
    const auto tick = Clock::now();
    IterationRecord rec;
    Eigen::MatrixXd u = problem.solve_u(f.v, config.mu, config.nu, config.method,
                                        config.cg_threshold);
    rec.objective_after_u =
        checked(problem.objective(u, f.v, config.mu, config.nu), previous, "U-step", k);
    Eigen::MatrixXd v = problem.solve_v(u, config.mu, config.nu, config.method,
                                        config.cg_threshold, &f.v);
    rec.objective =
        checked(problem.objective(u, v, config.mu, config.nu), rec.objective_after_u, "V-step", k);
    rec.step_u = (u - f.u).norm();
    rec.step_v = (v - f.v).norm();
    f.u = std::move(u);
    f.v = std::move(v);
    rec.seconds = seconds_since(tick);
    result.trace.iterations.push_back(rec);

    const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
    const bool settled = std::abs(previous - rec.objective) < config.tolerance * scale;
    previous = rec.objective;
    if (config.early_stop && settled) {
      result.converged = true;
      break;
    }
  }

  result.x = f.product();
  result.factors = std::move(f);
  result.state = extract_state(result.x, maps);
  result.seconds = seconds_since(start);
  return result;
}

Eigen::MatrixXd svt_complete(const MeasurementMatrix& m, const ObservationMask& mask, double mu,
                             std::size_t steps) {
  if (mask.rows != m.rows() || mask.cols != m.cols()) {
    throw InvalidArgument("mask dimensions do not match the measurement matrix");
  }
  if (mask.empty()) throw InvalidArgument("SVT needs a nonempty known set");
  if (!(mu > 0.0)) throw InvalidArgument("SVT weight mu must be > 0");
  const double threshold = 1.0 / mu;
  const Eigen::MatrixXd observed = project_observed(m.values, mask);
  const Eigen::MatrixXd indicator = mask.indicator();

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m.values.rows(), m.values.cols());
  for (std::size_t s = 0; s < steps; ++s) {
    const Eigen::MatrixXd y = x + observed - indicator.cwiseProduct(x);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd shrunk = (svd.singularValues().array() - threshold).cwiseMax(0.0);
    x = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
    if (!x.allFinite()) throw NumericalError("SVT iterate became non-finite");
  }
  return x;
}

PhaseEstimates extract_state(const Eigen::MatrixXd& x, const SelectorMaps& maps) {
  if (static_cast<std::size_t>(x.rows()) != maps.rows()) {
    throw InvalidArgument("matrix has " + std::to_string(x.rows()) + " rows, expected " +
                          std::to_string(maps.rows()));
  }
  const auto steps = static_cast<Eigen::Index>(maps.steps);
  PhaseEstimates out;
  out.magnitude.resize(steps, x.cols());
  out.angle_deg.resize(steps, x.cols());
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto re = x.row(5 * t);
    const auto im = x.row(5 * t + 1);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out.magnitude(t, j) = std::hypot(re(j), im(j));
      out.angle_deg(t, j) = std::atan2(im(j), re(j)) * 180.0 / std::numbers::pi;
    }
  }
  return out;
}

}  // namespace dsse

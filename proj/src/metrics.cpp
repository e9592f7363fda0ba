#include "dsse/metrics.hpp"

#include <cmath>

#include "dsse/error.hpp"

namespace dsse {

double wrap_degrees(double degrees) {
  double wrapped = std::fmod(degrees, 360.0);
  if (wrapped <= -180.0) wrapped += 360.0;
  if (wrapped > 180.0) wrapped -= 360.0;
  return wrapped;
}

double compute_mape_magnitude(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() || truth.size() == 0) {
    throw InvalidArgument("estimate and truth magnitudes must have the same nonempty shape");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double t = truth.data()[i];
    if (t == 0.0) throw InvalidArgument("true voltage magnitude is zero; MAPE undefined");
    total += std::abs((estimate.data()[i] - t) / t);
  }
  return 100.0 * total / static_cast<double>(truth.size());
}

double compute_mae_angle(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() || truth.size() == 0) {
    throw InvalidArgument("estimate and truth angles must have the same nonempty shape");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    total += std::abs(wrap_degrees(estimate.data()[i] - truth.data()[i]));
  }
  return total / static_cast<double>(truth.size());
}

}  // namespace dsse

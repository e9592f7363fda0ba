#pragma once

#include <Eigen/Dense>

namespace dsse {

// Wraps an angle difference to (-180, 180] degrees.
double wrap_degrees(double degrees);

// 100 / count * sum |(estimate - truth) / truth|. Throws on a zero truth entry
// or mismatched shapes.
double compute_mape_magnitude(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

// Mean of |wrap(estimate - truth)| in degrees.
double compute_mae_angle(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

}  // namespace dsse

#include "doctest.h"

#include "dsse/error.hpp"
#include "dsse/metrics.hpp"

using Eigen::MatrixXd;

namespace {
MatrixXd row(std::initializer_list<double> values) {
  MatrixXd m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}
}  // namespace

TEST_CASE("MAPE of magnitudes") {
  CHECK(dsse::compute_mape_magnitude(row({1.0, 0.97}), row({1.0, 0.97})) == 0.0);
  CHECK(dsse::compute_mape_magnitude(row({1.01, 0.99}), row({1.0, 1.0})) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dsse::compute_mape_magnitude(row({0.9595}), row({0.95})) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("MAPE rejects zero truth and shape mismatch") {
  CHECK_THROWS_AS(dsse::compute_mape_magnitude(row({1.0}), row({0.0})), dsse::InvalidArgument);
  CHECK_THROWS_AS(dsse::compute_mape_magnitude(row({1.0, 1.0}), row({1.0})),
                  dsse::InvalidArgument);
}

TEST_CASE("MAE of angles wraps around") {
  CHECK(dsse::compute_mae_angle(row({10.0, -120.0}), row({10.0, -120.0})) == 0.0);
  CHECK(dsse::compute_mae_angle(row({-179.0}), row({179.0})) == doctest::Approx(2.0));
  CHECK(dsse::compute_mae_angle(row({0.5, -120.5, 120.0}), row({0.0, -120.0, 120.0})) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("wrap_degrees lands in (-180, 180]") {
  CHECK(dsse::wrap_degrees(180.0) == 180.0);
  CHECK(dsse::wrap_degrees(-180.0) == 180.0);
  CHECK(dsse::wrap_degrees(540.0) == 180.0);
  CHECK(dsse::wrap_degrees(-190.0) == doctest::Approx(170.0));
  CHECK(dsse::wrap_degrees(359.0) == doctest::Approx(-1.0));
}

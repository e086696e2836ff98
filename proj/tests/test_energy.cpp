#include "tpflow/energy.hpp"
#include "tpflow/curve.hpp"
#include "tpflow/errors.hpp"
#include "tpflow/experiment.hpp"
#include "tpflow/reduce.hpp"
#include "tpflow/sobolev.hpp"

#include <doctest.h>

#include <cmath>

using namespace tpflow;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

struct ThreadGuard {
  ~ThreadGuard() { reduce::set_thread_count(1); }
};

// circle nodes resampled at a smoothly warped parameter; same geometric
// image as the round circle, different parametrization
Curve warped_circle(int n, double strength) {
  MatrixXd nodes(n, 2);
  const double r = 1.0 / kTau;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / n;
    const double u = x + strength * std::sin(kTau * x) / kTau;
    nodes(i, 0) = r * std::cos(kTau * u) - r;
    nodes(i, 1) = r * std::sin(kTau * u);
  }
  return Curve(nodes);
}

double factor_energy(const IntegrandFactors& f, const QuadratureGrid& grid, int n) {
  double total = 0.0;
  for (int j = 0; j < grid.size(); ++j) {
    double col = 0.0;
    for (int i = 0; i < n; ++i) {
      double fsq = 0.0;
      for (const MatrixXd& comp : f.f_component) fsq += comp(i, j) * comp(i, j);
      col += fsq * f.lambda(i, j) * f.lambda(i, j) * f.psi(i, j) * f.psi(i, j);
    }
    total += grid.weight_plain()[j] / n * col;
  }
  return total;
}

} // namespace

TEST_SUITE("energy") {

TEST_CASE("graded offset grid integrates its weight exactly") {
  const SobolevOrder order(1.75);
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, 64);
  const int nw = grid.size();
  REQUIRE(nw > 4);

  // symmetric about w = 0
  for (int j = 0; j < nw; ++j) {
    CHECK(grid.offsets()[j] == doctest::Approx(-grid.offsets()[nw - 1 - j]).epsilon(1e-15));
    CHECK(grid.weight_singular()[j] ==
          doctest::Approx(grid.weight_singular()[nw - 1 - j]).epsilon(1e-15));
    CHECK(std::abs(grid.offsets()[j]) < 0.5);
    CHECK(grid.weight_singular()[j] > 0.0);
  }
  for (int j = 0; j + 1 < nw; ++j) CHECK(grid.offsets()[j] < grid.offsets()[j + 1]);

  // weights sum to the full mass of |w|^{4-p} over [-1/2, 1/2]
  const double q = 5.0 - grid.p();
  CHECK(grid.weight_singular().sum() == doctest::Approx(grid.singular_mass()).epsilon(1e-13));
  CHECK(grid.singular_mass() == doctest::Approx(2.0 * std::pow(0.5, q) / q).epsilon(1e-15));

  // plain and singular weights differ by the kernel power
  for (int j = 0; j < nw; ++j) {
    const double expect =
        grid.weight_singular()[j] * std::pow(std::abs(grid.offsets()[j]), grid.p() - 4.0);
    CHECK(grid.weight_plain()[j] == doctest::Approx(expect).epsilon(1e-14));
  }

  // offset resolution scales with the curve grid
  CHECK(QuadratureGrid::for_energy(order, 256).size() > nw);

  CHECK_THROWS_AS(QuadratureGrid::build(4.0, 2, 1e-9), ConfigError);
  CHECK_THROWS_AS(QuadratureGrid::build(5.0, 2, 1e-9), ConfigError);
  CHECK_THROWS_AS(QuadratureGrid::build(4.5, 0, 1e-9), ConfigError);
  CHECK_THROWS_AS(QuadratureGrid::build(4.5, 2, 0.3), ConfigError);
}

TEST_CASE("scaled weight copies are bounds checked and take effect") {
  const SobolevOrder order(1.75);
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, 32);
  const int j = grid.size() / 2;
  const QuadratureGrid bumped = grid.scaled_weight(j, 1.5);
  CHECK(bumped.weight_singular()[j] == doctest::Approx(1.5 * grid.weight_singular()[j]));
  CHECK(bumped.weight_plain()[j] == doctest::Approx(1.5 * grid.weight_plain()[j]));
  CHECK(bumped.weight_singular()[j + 1] == grid.weight_singular()[j + 1]);

  const Curve circle = make_circle(32);
  CHECK(tp_energy(circle, order, bumped) != tp_energy(circle, order, grid));

  CHECK_THROWS_AS(grid.scaled_weight(-1, 1.1), ConfigError);
  CHECK_THROWS_AS(grid.scaled_weight(grid.size(), 1.1), ConfigError);
}

TEST_CASE("circle energy converges to the one dimensional reduction") {
  const SobolevOrder order(1.75);
  const double ref = circle_energy_reference(order.singular_power());
  CHECK(ref == doctest::Approx(29.2).epsilon(0.01));

  double prev_err = 0.0;
  for (int n : {64, 128, 256}) {
    const Curve circle = make_circle(n);
    const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
    const double err = std::abs(tp_energy(circle, order, grid) - ref) / ref;
    if (n > 64) CHECK(err < prev_err / 4.0);
    prev_err = err;
  }
  CHECK(prev_err <= 1e-6);

  // other admissible exponents
  for (double s : {1.6, 1.9}) {
    const SobolevOrder o(s);
    const Curve circle = make_circle(128);
    const QuadratureGrid grid = QuadratureGrid::for_energy(o, 128);
    const double want = circle_energy_reference(o.singular_power());
    CHECK(tp_energy(circle, o, grid) == doctest::Approx(want).epsilon(1e-4));
  }
}

TEST_CASE("energy scales with the homogeneity exponent") {
  const SobolevOrder order(1.75);
  const int n = 64;
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
  const Curve base = make_perturbed_circle(n, 2, 5, 0.04, 3);
  const double e0 = tp_energy(base, order, grid);
  for (double lam : {0.5, 2.3}) {
    const Curve scaled(lam * base.nodes());
    const double want = std::pow(lam, 4.0 - order.singular_power()) * e0;
    CHECK(tp_energy(scaled, order, grid) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("energy is invariant under rigid motions") {
  const SobolevOrder order(1.75);
  const int n = 64;
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
  const Curve base = make_perturbed_circle(n, 2, 5, 0.04, 9);
  const double e0 = tp_energy(base, order, grid);

  const double a = 0.83;
  MatrixXd moved(n, 2);
  for (int i = 0; i < n; ++i) {
    const double x = base.nodes()(i, 0);
    const double y = base.nodes()(i, 1);
    moved(i, 0) = std::cos(a) * x - std::sin(a) * y + 0.37;
    moved(i, 1) = std::sin(a) * x + std::cos(a) * y - 1.24;
  }
  CHECK(tp_energy(Curve(moved), order, grid) == doctest::Approx(e0).epsilon(1e-11));
}

TEST_CASE("energy of a reparametrized circle converges to the round value") {
  const SobolevOrder order(1.75);
  double prev = 0.0;
  for (int n : {64, 128, 256}) {
    const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
    const double round = tp_energy(make_circle(n), order, grid);
    const double warped = tp_energy(warped_circle(n, 0.1), order, grid);
    const double diff = std::abs(warped - round) / round;
    if (n > 64) CHECK(diff < prev / 3.0);
    prev = diff;
  }
}

TEST_CASE("classical energy of the circle is exact") {
  for (int n : {32, 96}) {
    const Curve circle = make_circle(n);
    const double q = 2.5;
    CHECK(tp_energy_classical(circle, q) == doctest::Approx(std::pow(kTau, q)).epsilon(1e-8));
  }
}

TEST_CASE("integrand factors reproduce the energy") {
  const SobolevOrder order(1.7);
  const int n = 64;
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
  const Curve curve = make_perturbed_circle(n, 2, 6, 0.05, 17);
  const IntegrandFactors f = integrand_factors(curve, order, grid);
  REQUIRE(static_cast<int>(f.f_component.size()) == 2);
  REQUIRE(f.lambda.rows() == n);
  REQUIRE(f.lambda.cols() == grid.size());
  const double from_factors = factor_energy(f, grid, n);
  const double direct = tp_energy(curve, order, grid);
  CHECK(from_factors == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("energy is bitwise stable across worker counts") {
  const SobolevOrder order(1.75);
  const int n = 128;
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
  const Curve curve = make_perturbed_circle(n, 2, 5, 0.04, 21);
  ThreadGuard guard;
  reduce::set_thread_count(1);
  const double e1 = tp_energy(curve, order, grid);
  reduce::set_thread_count(2);
  const double e2 = tp_energy(curve, order, grid);
  reduce::set_thread_count(5);
  const double e5 = tp_energy(curve, order, grid);
  CHECK(e1 == e2);
  CHECK(e1 == e5);
}

TEST_CASE("chord collapse below the floor raises a located error") {
  const SobolevOrder order(1.75);
  const int n = 64;
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);

  // every chord of the unit circle is shorter than 0.8 * length, so a
  // floor at that fraction must fire on any offset away from the diagonal
  const Curve circle = make_circle(n);
  int j = 0;
  for (int c = 1; c < grid.size(); ++c) {
    if (std::abs(grid.offsets()[c] - 0.3) < std::abs(grid.offsets()[j] - 0.3)) j = c;
  }
  REQUIRE(std::abs(grid.offsets()[j]) >= 2.0 / n);
  detail::OffsetGeometry geo;
  bool thrown = false;
  try {
    detail::offset_geometry(circle, grid, j, geo, 0.8);
  } catch (const SelfIntersectionError& err) {
    thrown = true;
    CHECK(err.node() >= 0);
    CHECK(err.node() < n);
    CHECK(std::abs(err.offset()) >= 2.0 / n);
    CHECK(err.exit_code() == 4);
  }
  CHECK(thrown);

  // the default floor is a last resort and stays quiet on a legitimate,
  // resolved, strongly eccentric curve
  const Curve thin = make_ellipse(n, 1e7);
  CHECK_NOTHROW(tp_energy(thin, order, grid));
}

} // TEST_SUITE

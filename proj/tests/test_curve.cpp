#include "tpflow/curve.hpp"
#include "tpflow/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace tpflow;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;
constexpr double kPi = 3.14159265358979323846264338328;

// circle nodes resampled at a smoothly warped parameter
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

MatrixXd rotate2(const MatrixXd& nodes, double angle) {
  MatrixXd out = nodes;
  const double c = std::cos(angle), s = std::sin(angle);
  out.col(0) = c * nodes.col(0) - s * nodes.col(1);
  out.col(1) = s * nodes.col(0) + c * nodes.col(1);
  return out;
}

} // namespace

TEST_SUITE("curve") {

TEST_CASE("circle is unit speed and unit length") {
  const Curve c = make_circle(256);
  CHECK((c.speed().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(c.length() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(c.polyline_length() < 1.0);
  CHECK(c.polyline_length() > 0.999);
  CHECK(c.nodes().row(0).norm() < 1e-15); // base point pinned
}

TEST_CASE("constructor validates its input") {
  CHECK_THROWS_AS(Curve(MatrixXd::Zero(4, 2)), ConfigError);   // too few nodes
  CHECK_THROWS_AS(Curve(MatrixXd::Zero(64, 1)), ConfigError);  // one component
  MatrixXd bad = make_circle(64).nodes();
  bad(3, 0) = std::nan("");
  CHECK_THROWS_AS(Curve{bad}, ConfigError);
  CHECK_THROWS_AS(Curve(MatrixXd::Zero(64, 2)), ConfigError);  // no regularity

  MatrixXd touching = make_circle(64).nodes();
  touching.row(20) = touching.row(40); // exact coincidence at gap >= 2
  CHECK_THROWS_AS(Curve{touching}, SelfIntersectionError);
}

TEST_CASE("self intersection error carries the node pair") {
  MatrixXd touching = make_circle(64).nodes();
  touching.row(20) = touching.row(40);
  try {
    Curve c(touching);
    FAIL("expected a self intersection error");
  } catch (const SelfIntersectionError& e) {
    CHECK(e.exit_code() == 4);
    CHECK(std::string(e.what()).find("20") != std::string::npos);
  }
}

TEST_CASE("arc derivative divides by the speed") {
  const Curve c = warped_circle(256, 0.3);
  const Field g(c.nodes());
  const MatrixXd ad = arc_derivative(c, g);
  // the arc-length derivative of the curve itself is the unit tangent
  for (int i = 0; i < c.grid_size(); ++i) {
    CHECK(ad.row(i).norm() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("chord defect across the circle is the diameter") {
  const int n = 128;
  const Curve c = make_circle(n);
  const Field g(c.nodes());
  const VectorXd defect = chord_defect(c, g, 0, n / 2);
  CHECK(defect.norm() == doctest::Approx(1.0 / kPi).epsilon(1e-10));
}

TEST_CASE("tangent point radius of a circle is its radius") {
  const int n = 128;
  const Curve c = make_circle(n);
  const double r = 1.0 / kTau;
  for (int j : {1, 3, 17, 40, 64, 100}) {
    CHECK(tangent_point_radius(c, 0, j) == doctest::Approx(r).epsilon(1e-10));
    CHECK(tangent_point_radius(c, 57, (57 + j) % n) == doctest::Approx(r).epsilon(1e-10));
  }
}

TEST_CASE("tangent point radius degenerates to infinity on a line") {
  VectorXd d(2), t(2);
  d << 3.0, 0.0;
  t << 1.0, 0.0; // chord parallel to the tangent: infinite radius
  CHECK(std::isinf(tangent_point_radius(d, t)));
}

TEST_CASE("circle distortion approaches pi over two") {
  const double d256 = distortion(make_circle(256));
  const double d512 = distortion(make_circle(512));
  CHECK(std::abs(d256 - kPi / 2.0) < 1e-3);
  CHECK(std::abs(d512 - kPi / 2.0) < std::abs(d256 - kPi / 2.0));
  // refinement error drops like the square of the grid spacing
  CHECK(std::abs(d256 - kPi / 2.0) / std::abs(d512 - kPi / 2.0) > 3.0);
}

TEST_CASE("ellipse distorts more than the circle") {
  CHECK(distortion(make_ellipse(256, 1.5)) > kPi / 2.0 + 1e-3);
}

TEST_CASE("distortion and separation are geometric invariants") {
  const Curve c = make_ellipse(128, 2.0);
  MatrixXd moved = rotate2(c.nodes(), 0.7);
  moved.col(0).array() += 3.5;
  moved.col(1).array() -= 1.25;
  const Curve m(moved);
  CHECK(distortion(m) == doctest::Approx(distortion(c)).epsilon(1e-12));
  CHECK(min_separation(m) == doctest::Approx(min_separation(c)).epsilon(1e-12));

  const Curve scaled(3.0 * c.nodes());
  CHECK(distortion(scaled) == doctest::Approx(distortion(c)).epsilon(1e-12));
  CHECK(min_separation(scaled) == doctest::Approx(3.0 * min_separation(c)).epsilon(1e-12));
}

TEST_CASE("retraction fixes the circle") {
  const Curve c = make_circle(128);
  const Curve r = retract_to_arclength(c);
  CHECK((r.nodes() - c.nodes()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("retraction undoes a reparametrization") {
  const int n = 256;
  const Curve warped = warped_circle(n, 0.4);
  CHECK((warped.speed().array() / warped.length() - 1.0).abs().maxCoeff() > 0.1);

  const Curve r = retract_to_arclength(warped);
  CHECK((r.speed().array() / r.length() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(r.length() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.nodes().row(0).norm() < 1e-12);
  // the arclength parametrization of a circle is the round one
  const Curve round = make_circle(n);
  MatrixXd centered = r.nodes();
  centered.col(0).array() += 1.0 / kTau; // same center as the round circle
  MatrixXd reference = round.nodes();
  reference.col(0).array() += 1.0 / kTau;
  CHECK((centered - reference).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("retraction scales to unit length") {
  const Curve big(2.5 * make_circle(64).nodes());
  const Curve r = retract_to_arclength(big);
  CHECK(r.length() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("torus knot is a valid space curve on a mixed radix grid") {
  const Curve k = make_torus_knot(384, 2, 3, 0.25);
  CHECK(k.ambient_dim() == 3);
  CHECK(k.grid_size() == 384);
  CHECK(k.length() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(k.nodes().row(0).norm() < 1e-12);
  CHECK(min_separation(k) > 0.0);
}

TEST_CASE("perturbed circle stays near the circle") {
  const Curve p = make_perturbed_circle(256, 2, 5, 0.03, 42);
  const double r = 1.0 / kTau;
  const Eigen::RowVector2d center = p.nodes().colwise().mean();
  for (int i = 0; i < p.grid_size(); ++i) {
    CHECK((p.nodes().row(i) - center).norm() == doctest::Approx(r).epsilon(0.05));
  }
  CHECK(p.nodes().row(0).norm() == 0.0);
  // deterministic in the seed
  const Curve q = make_perturbed_circle(256, 2, 5, 0.03, 42);
  CHECK((p.nodes() - q.nodes()).cwiseAbs().maxCoeff() == 0.0);
  const Curve other = make_perturbed_circle(256, 2, 5, 0.03, 43);
  CHECK((p.nodes() - other.nodes()).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("random fields are reproducible and band limited") {
  const Field f = make_random_field(64, 2, 6, 9);
  const Field g = make_random_field(64, 2, 6, 9);
  CHECK((f.values - g.values).cwiseAbs().maxCoeff() == 0.0);
  // modes above the cap are absent
  for (int c = 0; c < 2; ++c) {
    const VectorXcd fc = f.coeffs[static_cast<size_t>(c)];
    for (int j = 0; j < 64; ++j) {
      const int k = fourier::bin_frequency(j, 64);
      if (std::abs(k) > 6) CHECK(std::abs(fc[j]) < 1e-14);
    }
  }
}

TEST_CASE("field caches the spectral derivative") {
  const Field f = make_random_field(64, 3, 10, 123);
  CHECK((f.deriv - fourier::derivative_cols(f.values)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("csv round trip is exact") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tpflow_curve_csv";
  fs::create_directories(dir);
  const std::string path = (dir / "knot.csv").string();

  const Curve k = make_torus_knot(64, 2, 3, 0.3);
  write_curve_csv(k, path);
  const Curve back = read_curve_csv(path);
  CHECK((back.nodes() - k.nodes()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("csv parser rejects malformed input") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tpflow_curve_csv";
  fs::create_directories(dir);

  auto write_text = [&](const char* name, const char* text) {
    const std::string path = (dir / name).string();
    std::ofstream out(path);
    out << text;
    return path;
  };

  CHECK_THROWS_AS(read_curve_csv((dir / "missing.csv").string()), ConfigError);
  CHECK_THROWS_AS(read_curve_csv(write_text("badhead.csv", "a,b,c\n0,1,2\n")), ConfigError);
  CHECK_THROWS_AS(
      read_curve_csv(write_text("badnum.csv", "x,g1,g2\n0,zero,0\n0.5,1,1\n")),
      ConfigError);
  CHECK_THROWS_AS(read_curve_csv(write_text("ragged.csv", "x,g1,g2\n0,1\n")), ConfigError);
}

} // TEST_SUITE

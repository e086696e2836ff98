#pragma once

#include "tpflow/fourier.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

// Closed curves R/Z -> R^n sampled on the uniform grid x_i = i/N and
// identified with their trigonometric interpolants.  Rows of the node
// matrix are curve points; derivatives are spectral.

namespace tpflow {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Periodic vector field along the grid (a displacement of curve nodes).
// Stores samples, the spectral derivative, and the Fourier coefficients
// of both (used for off-grid traces).
struct Field {
  MatrixXd values;
  MatrixXd deriv;
  std::vector<VectorXcd> coeffs;
  std::vector<VectorXcd> deriv_coeffs;

  Field() = default;
  explicit Field(MatrixXd vals);

  int grid_size() const { return static_cast<int>(values.rows()); }
  int ambient_dim() const { return static_cast<int>(values.cols()); }
};

class Curve {
public:
  // Validates shape (N >= 8, n >= 2), finiteness, regularity of the
  // spectral derivative at the nodes, and discrete injectivity (distinct
  // nodes at cyclic index gap >= 2).
  explicit Curve(MatrixXd nodes);

  int grid_size() const { return static_cast<int>(nodes_.rows()); }
  int ambient_dim() const { return static_cast<int>(nodes_.cols()); }

  const MatrixXd& nodes() const { return nodes_; }
  const MatrixXd& deriv() const { return deriv_; }

  // Fourier coefficients per ambient component, and of the component
  // derivatives (cached at construction).
  const std::vector<VectorXcd>& coeffs() const { return coeffs_; }
  const std::vector<VectorXcd>& deriv_coeffs() const { return deriv_coeffs_; }

  // |gamma'| at the nodes.
  const VectorXd& speed() const { return speed_; }

  // Quadrature length: mean of |gamma'| (equals the length of the
  // interpolant up to spectral accuracy).
  double length() const { return speed_.mean(); }

  // Total length of the node polygon.
  double polyline_length() const;

  // Point and derivative of the interpolant at an arbitrary parameter.
  VectorXd point_at(double x) const;
  VectorXd derivative_at(double x) const;

private:
  MatrixXd nodes_;
  MatrixXd deriv_;
  VectorXd speed_;
  std::vector<VectorXcd> coeffs_;
  std::vector<VectorXcd> deriv_coeffs_;
};

// Derivative with respect to arc length, h'(x)/|gamma'(x)| at the nodes.
MatrixXd arc_derivative(const Curve& curve, const Field& h);

// Chord defect of a field between nodes i and j:
//   h(x_j) - h(x_i) - D h(x_i) <D gamma(x_i), gamma(x_j) - gamma(x_i)>
// where D is the arc-length derivative.
VectorXd chord_defect(const Curve& curve, const Field& h, int i, int j);

// Radius of the circle through p + dgamma tangent to `tangent` at p.
// Returns +infinity when dgamma has no component normal to the tangent.
double tangent_point_radius(const VectorXd& dgamma, const VectorXd& tangent);

// Same, between nodes i and j of a curve.
double tangent_point_radius(const Curve& curve, int i, int j);

// Gromov distortion: max over node pairs at cyclic gap >= 2 of intrinsic
// (shorter-arc polyline) distance over chord distance.
double distortion(const Curve& curve);

// Minimum distance between non-adjacent segments of the node polygon.
double min_separation(const Curve& curve);

// Reparametrizes to constant speed, scales to unit length, and moves
// gamma(0) to the origin.  Fixed point on curves already of that form.
Curve retract_to_arclength(const Curve& curve);

// Named constructors.  All are unit length with gamma(0) at the origin
// except where noted; callers wanting exact constant speed should pass
// the result through retract_to_arclength (circle needs no correction).
Curve make_circle(int grid_size, int ambient_dim = 2);
Curve make_ellipse(int grid_size, double axis_ratio);
Curve make_torus_knot(int grid_size, int wraps, int windings, double tube_ratio);
Curve make_perturbed_circle(int grid_size, int mode_lo, int mode_hi,
                            double amplitude, unsigned long long seed);

// Smooth random displacement field: per component a constant plus modes
// 1..max_mode with uniform coefficients damped by 1/m^2.  Deterministic
// in the seed across platforms.
Field make_random_field(int grid_size, int ambient_dim, int max_mode,
                        unsigned long long seed);

// CSV exchange: header "x,g1,...,gn", one row per node.
void write_curve_csv(const Curve& curve, const std::string& path);
Curve read_curve_csv(const std::string& path);

} // namespace tpflow

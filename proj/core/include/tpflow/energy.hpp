#pragma once

#include "tpflow/curve.hpp"
#include "tpflow/sobolev.hpp"

#include <Eigen/Dense>
#include <vector>

// Tangent-point energy of exponent p = 2s + 1 in the projector form
//   E(gamma) = int int |P_perp(gamma'(x)) (gamma(x+w) - gamma(x))|^2
//              / |gamma(x+w) - gamma(x)|^p  |gamma'(x)| |gamma'(x+w)| dw dx
// over (x, w) in (R/Z) x (-1/2, 1/2), discretized by spectral
// interpolation in x and a symmetric graded product rule in w.

namespace tpflow {

// Offsets w_j with two weight views:
//   weight_singular: integrates |w|^{4-p} G(w) as sum w_singular_j G(w_j)
//   weight_plain:    integrates F(w) as sum w_plain_j F(w_j), for
//                    integrands F that behave like |w|^{4-p} near 0
// Each dyadic level carries a fixed number of subcells with a two-point
// rule exact for cubics against the |w|^{4-p} weight; the cell at the
// origin is closed by a one-point rule at the weighted centroid.
class QuadratureGrid {
public:
  static QuadratureGrid for_energy(const SobolevOrder& order, int grid_size);
  static QuadratureGrid build(double p, int cells_per_level, double head);

  const VectorXd& offsets() const { return offsets_; }
  const VectorXd& weight_singular() const { return weight_singular_; }
  const VectorXd& weight_plain() const { return weight_plain_; }
  double p() const { return p_; }
  int size() const { return static_cast<int>(offsets_.size()); }

  // Exact value of int_{-1/2}^{1/2} |w|^{4-p} dw for validation.
  double singular_mass() const;

  // Copy with the weights at one offset scaled; verification uses this
  // as a negative control that its checks must catch.
  QuadratureGrid scaled_weight(int index, double factor) const;

private:
  QuadratureGrid() = default;
  VectorXd offsets_;
  VectorXd weight_singular_;
  VectorXd weight_plain_;
  double p_ = 0.0;
};

double tp_energy(const Curve& curve, const SobolevOrder& order, const QuadratureGrid& grid);

// Reference double sum over node pairs of (1/r)^q weighted by
// |gamma'| |gamma'| / N^2, including the diagonal through the curvature
// limit of the tangent-point radius.
double tp_energy_classical(const Curve& curve, double q);

// Factorized integrand f = F * Lambda * psi with
//   F      = chord defect scaled by |w|^{-s-1/2} (assembled through the
//            arc-length form, whose cancellation is checked in tests)
//   Lambda = (|w| / |chord|)^{p/2}
//   psi    = sqrt(|gamma'(x)| |gamma'(x+w)|)
// so that |f|^2 integrated with plain weights reproduces tp_energy.
struct IntegrandFactors {
  std::vector<MatrixXd> f_component; // grid_size x offsets each
  MatrixXd lambda;
  MatrixXd psi;
};
IntegrandFactors integrand_factors(const Curve& curve, const SobolevOrder& order,
                                   const QuadratureGrid& grid);

namespace detail {

// Chord geometry for one offset w_j, all base nodes at once.  Everything
// downstream of the energy (first and second variation forms, gradient
// covectors) reads these tables so that discrete derivatives are exact
// derivatives of the discrete energy.
struct OffsetGeometry {
  double w = 0.0;
  double weight = 0.0;  // plain weight
  MatrixXd yder;        // gamma'(x_i + w)
  MatrixXd dgam;        // chord gamma(x_i + w) - gamma(x_i)
  VectorXd dist;        // |chord|
  VectorXd speed_y;
  VectorXd tangency;    // a_i = <u_i, chord_i>, u_i unit tangent at x_i
  MatrixXd lgg;         // chord defect of gamma itself: chord - u a
  VectorXd lgg_sq;
  VectorXd mu;          // weight/N * |g'(x)| |g'(x+w)| / dist
};

// Throws SelfIntersectionError if a chord with |w| >= 2/N is shorter
// than floor_fraction * length.
void offset_geometry(const Curve& curve, const QuadratureGrid& grid, int j,
                     OffsetGeometry& out, double floor_fraction = 1e-6);

// Interpolated values and derivative of a field on the shifted grid.
struct FieldTrace {
  MatrixXd yder;   // h'(x_i + w)
  MatrixXd ydiff;  // h(x_i + w) - h(x_i), accurate at small |w|
};
void field_trace(const Field& h, double w, FieldTrace& out);

// Two-point rule on [a, b] with 0 < a < b, exact for cubics against the
// weight w^e.  Any real e is accepted; the log moment at e + r = -1 is
// handled explicitly.
void gauss_cell_weighted(double a, double b, double e, double nodes[2], double weights[2]);

} // namespace detail

} // namespace tpflow

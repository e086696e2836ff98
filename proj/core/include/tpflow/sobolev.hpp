#pragma once

#include "tpflow/curve.hpp"

#include <Eigen/Dense>
#include <vector>

// Fractional Sobolev machinery on R/Z: the spectral H^s inner product
// with multiplier 1 + |2 pi k|^{2s}, the Gagliardo seminorm, the averaged
// difference operator used to control energy integrands, and the H^s
// Riesz solve (dual density -> representing field).

namespace tpflow {

struct SobolevOrder {
  double s;
  // Valid energies need s strictly inside (3/2, 2).
  explicit SobolevOrder(double value);
  double singular_power() const { return 2.0 * s + 1.0; } // p = 2s + 1
};

// <h, k> with multiplier m_k = 1 + |2 pi k|^{2s}, summed over components.
// Accepts any s > 0 (callers use shifted orders such as s - 1).
double hs_inner(const Field& h, const Field& k, double s);
double hs_norm_sq(const Field& h, double s);

// Squared Gagliardo seminorm of order sigma in (0, 1):
//   int int_{|z| <= 1/2} |k(x+z) - k(x)|^2 / |z|^{2 sigma + 1} dz dx.
// The z integral uses a graded rule independent of the grid size, closed
// near z = 0 by the quadratic small-difference model.
double gagliardo_seminorm_sq(const Field& k, double sigma);

// Averaged difference operator:
//   phi(k)(x, w) = |w|^{-s-1/2} int_x^{x+w} (k(x) - k(theta)) dtheta.
// Values are returned per ambient component as N x N_w matrices, on the
// offsets of the supplied quadrature-type w grid.
struct PhiValues {
  std::vector<MatrixXd> component; // each grid_size x offsets
  VectorXd offsets;
  VectorXd weights; // plain w-weights matching the offsets
};
class QuadratureGrid; // defined in energy.hpp
PhiValues phi_operator(const Field& k, const SobolevOrder& order, const QuadratureGrid& grid);

// Squared L^2(dx dw) norm of phi(k) on the grid offsets.
double phi_norm_sq(const PhiValues& phi, int grid_size);

// Riesz solve: given the L^2 density f of a functional
// l(h) = (1/N) sum_i <f_i, h_i>, returns g with <g, h>_{H^s} = l(h).
Field riesz_solve(const Field& density, double s);

} // namespace tpflow

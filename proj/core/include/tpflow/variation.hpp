#pragma once

#include "tpflow/constraint.hpp"
#include "tpflow/energy.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <string>

// First and second variation of the tangent-point energy.  The energy
// differential decomposes into three bilinear forms,
//   DE(gamma) h = 2 B1(gamma, h) - p B2(gamma, h) + B3(gamma, h),
// and differentiating the forms with frozen slot arguments yields the
// second variation
//   D2E(h, k) = 2 B1(h,k) - p B2(h,k) + B3(h,k)
//             + 2 DB1(k)(gamma,h) - p DB2(k)(gamma,h) + DB3(k)(gamma,h).
// The frozen-argument displays are valid on tangent directions along
// near-arclength curves; DB3 vanishes there, which is checked rather
// than assumed.

namespace tpflow {

// Scalar bilinear forms.  All take the same quadrature grid as the
// energy; b1 with both slots equal to the curve nodes reproduces it.
double b1_form(const Curve& curve, const Field& h, const Field& k,
               const SobolevOrder& order, const QuadratureGrid& grid);
double b2_form(const Curve& curve, const Field& h, const Field& k,
               const SobolevOrder& order, const QuadratureGrid& grid);
double b3_form(const Curve& curve, const Field& h, const Field& k,
               const SobolevOrder& order, const QuadratureGrid& grid);

// b2 with the symmetric exponent split s -> (s+eps, s-eps) applied to
// the two chord-defect factors of the curve term; equal to b2_form up
// to roundoff for any admissible eps.
double b2_form_split(const Curve& curve, const Field& h, const Field& k,
                     const SobolevOrder& order, const QuadratureGrid& grid, double eps);

// L^2 density f of the differential: DE(gamma) h = (1/N) sum_i <f_i, h_i>.
// Exact derivative of the discrete tp_energy (same tables, chain rule).
Field d_tp(const Curve& curve, const SobolevOrder& order, const QuadratureGrid& grid);

// Pairing of a density with a field under the (1/N) sum convention.
double pair_density(const Field& density, const Field& h);

// Frozen-argument derivatives of the forms in curve direction k.
// db2 requires k tangent along the curve at the nodes; db1 and db3 are
// evaluated from their full displayed expressions.
double db1_form(const Curve& curve, const Field& psi1, const Field& psi2, const Field& k,
                const SobolevOrder& order, const QuadratureGrid& grid);
double db2_form(const Curve& curve, const Field& psi1, const Field& psi2, const Field& k,
                const SobolevOrder& order, const QuadratureGrid& grid);
double db2_form_split(const Curve& curve, const Field& psi1, const Field& psi2,
                      const Field& k, const SobolevOrder& order, const QuadratureGrid& grid,
                      double eps);
double db3_form(const Curve& curve, const Field& psi1, const Field& psi2, const Field& k,
                const SobolevOrder& order, const QuadratureGrid& grid);

// Largest |db3| over `samples` random triples of tangent fields of unit
// H^s norm (the vanishing observed along arclength curves).
double db3_vanishes(const Curve& curve, const SobolevOrder& order, const QuadratureGrid& grid,
                    int samples, unsigned long long seed);

// Second variation scalar on tangent directions.
double d2_tp(const Curve& curve, const Field& h, const Field& k, const SobolevOrder& order,
             const QuadratureGrid& grid);

// Length functional: quadrature value, differential density, and second
// variation (normal part of the derivatives).
double curve_length(const Curve& curve);
Field d_length(const Curve& curve);
double d2_length(const Curve& curve, const Field& h, const Field& k);

// Multiplier of the length constraint at a critical point:
//   lambda = - <DE, DL>_dual / <DL, DL>_dual
// with the H^s dual pairing of the two differential densities.
double lagrange_multiplier(const Curve& curve, const SobolevOrder& order,
                           const QuadratureGrid& grid);

// Inner product metric candidate G = B1 + B2 + B3 + L^2 + (arc derivative L^2).
double metric_g(const Curve& curve, const Field& h, const Field& k,
                const SobolevOrder& order, const QuadratureGrid& grid);

// Dense bilinear form matrix on the nodal basis (dof index c*N + i) or
// embedded from a reduced tangent-space form.
struct FormMatrix {
  Eigen::MatrixXd matrix;
  std::string kind; // b1 | b2 | b3 | g | hessian | ktilde
  double s = 0.0;
  int grid_size = 0;
  int ambient_dim = 0;
  std::uint64_t curve_hash = 0;
};

FormMatrix form_matrix(const Curve& curve, const SobolevOrder& order,
                       const QuadratureGrid& grid, const std::string& kind);

// Constrained second variation (D2E + lambda D2L) reduced to the given
// H^s-orthonormal tangent basis.
Eigen::MatrixXd constrained_hessian(const Curve& curve, const SobolevOrder& order,
                                    const QuadratureGrid& grid, const TangentBasis& basis);

// Reduced metric on the same basis.
Eigen::MatrixXd metric_g_reduced(const Curve& curve, const SobolevOrder& order,
                                 const QuadratureGrid& grid, const TangentBasis& basis);

// Difference K = D2E - G on the tangent basis, with its singular values
// (descending) for compactness profiling.
struct RemainderDecomposition {
  Eigen::MatrixXd reduced;    // m x m
  Eigen::VectorXd singular;   // descending
};
RemainderDecomposition compact_remainder(const Curve& curve, const SobolevOrder& order,
                                         const QuadratureGrid& grid, const TangentBasis& basis);

// CSV export with a JSON sidecar (kind, order, shape, curve hash) at
// path + ".json"; read_form_matrix_csv validates against the sidecar.
void write_form_matrix_csv(const FormMatrix& m, const std::string& path);
FormMatrix read_form_matrix_csv(const std::string& path);

// FNV-1a hash of the node bytes (stable across runs for identical data).
std::uint64_t curve_hash(const Curve& curve);

} // namespace tpflow

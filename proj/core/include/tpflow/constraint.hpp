#pragma once

#include "tpflow/curve.hpp"
#include "tpflow/energy.hpp"
#include "tpflow/sobolev.hpp"

#include <Eigen/Dense>

// Linearized arclength-manifold constraints at a curve: nodewise
// tangency <gamma'(x_i), h'(x_i)> = 0 plus the pinned base point
// h(0) = 0, with H^s-orthogonal projection and the constrained Riesz
// solve (KKT saddle system, Schur complement in the constraint rows).

namespace tpflow {

class ConstraintSystem {
public:
  ConstraintSystem(const Curve& curve, double s);

  int grid_size() const { return grid_size_; }
  int ambient_dim() const { return ambient_dim_; }
  int count() const { return static_cast<int>(rows_.rows()); }
  const MatrixXd& rows() const { return rows_; }

  // Residual C h of the constraints on a field.
  VectorXd residual(const Field& h) const;

  // H^s-orthogonal projection onto the null space.
  Field project(const Field& h) const;

  // Representer of a dual density within the null space:
  // returns g with <g, v>_{H^s} = (1/N) sum <density_i, v_i> for all
  // constrained v.
  Field constrained_riesz(const Field& density) const;

  // H^s-orthonormal basis of the null space, stacked dof (c*N + i).
  MatrixXd null_basis() const;

private:
  void check_shape(const Field& h, const char* where) const;
  VectorXd apply_inverse_gram(const VectorXd& dual) const;
  VectorXd apply_gram(const VectorXd& primal) const;

  double s_;
  int grid_size_;
  int ambient_dim_;
  MatrixXd rows_;            // (N + n) x (n N)
  MatrixXd inv_gram_rows_;   // A^{-1} C^T
  Eigen::LDLT<MatrixXd> schur_;
};

// H^s-orthonormal tangent basis of a curve's constraint null space.
struct TangentBasis {
  MatrixXd columns; // (n N) x m
  double s = 0.0;
  int grid_size = 0;
  int ambient_dim = 0;
  int dimension() const { return static_cast<int>(columns.cols()); }
};
TangentBasis tangent_basis(const Curve& curve, double s);

Field project_tangent(const Curve& curve, const Field& h, double s);

struct GradientResult {
  Field gradient;
  double norm_hs = 0.0;  // sqrt(<g, g>_{H^s})
  double pairing = 0.0;  // DE(g), equals norm_hs^2 at the solution
};
GradientResult constrained_gradient(const Curve& curve, const SobolevOrder& order,
                                    const QuadratureGrid& grid);

// Field <-> stacked dof vector helpers (dof index c*N + i).
VectorXd flatten_field(const MatrixXd& values);
MatrixXd unflatten_field(const VectorXd& dof, int grid_size, int ambient_dim);

} // namespace tpflow

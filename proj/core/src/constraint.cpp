#include "tpflow/constraint.hpp"

#include "tpflow/errors.hpp"
#include "tpflow/variation.hpp"

#include <cmath>
#include <string>

namespace tpflow {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Spectral H^s Gram multipliers per frequency bin.
VectorXd gram_multipliers(int n, double s) {
  VectorXd m(n);
  for (int j = 0; j < n; ++j) {
    const int freq = fourier::bin_frequency(j, n);
    m[j] = 1.0 + std::pow(kTwoPi * std::abs(freq), 2.0 * s);
  }
  return m;
}

} // namespace

VectorXd flatten_field(const MatrixXd& values) {
  const int n = static_cast<int>(values.rows());
  const int dim = static_cast<int>(values.cols());
  VectorXd v(n * dim);
  for (int c = 0; c < dim; ++c) v.segment(c * n, n) = values.col(c);
  return v;
}

MatrixXd unflatten_field(const VectorXd& dof, int grid_size, int ambient_dim) {
  if (dof.size() != static_cast<long>(grid_size) * ambient_dim) {
    throw ConfigError("dof vector does not match grid shape");
  }
  MatrixXd values(grid_size, ambient_dim);
  for (int c = 0; c < ambient_dim; ++c) values.col(c) = dof.segment(c * grid_size, grid_size);
  return values;
}

ConstraintSystem::ConstraintSystem(const Curve& curve, double s)
    : s_(s), grid_size_(curve.grid_size()), ambient_dim_(curve.ambient_dim()) {
  if (!(s > 0.0)) throw ConfigError("constraint system needs a positive order");
  const int n = grid_size_;
  const int dim = ambient_dim_;

  // spectral differentiation matrix (real, antisymmetric)
  MatrixXd diff(n, n);
  {
    VectorXd e = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      e.setZero();
      e[i] = 1.0;
      diff.col(i) = fourier::derivative(e);
    }
  }

  rows_ = MatrixXd::Zero(n + dim, n * dim);
  // tangency rows: <gamma'(x_i), (Dh)(x_i)> = 0
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < dim; ++c) {
      rows_.block(i, c * n, 1, n) = curve.deriv()(i, c) * diff.row(i);
    }
  }
  // base point rows: h(0) = 0 componentwise
  for (int c = 0; c < dim; ++c) rows_(n + c, c * n) = 1.0;

  // Schur complement S = C A^{-1} C^T
  const int rows = n + dim;
  inv_gram_rows_.resize(n * dim, rows);
  for (int r = 0; r < rows; ++r) {
    inv_gram_rows_.col(r) = apply_inverse_gram(rows_.row(r).transpose());
  }
  MatrixXd schur = rows_ * inv_gram_rows_;
  schur_ = Eigen::LDLT<MatrixXd>(0.5 * (schur + schur.transpose()));
  if (schur_.info() != Eigen::Success) {
    throw LinearAlgebraError("constraint Schur complement factorization failed");
  }
}

// Both Gram maps are scaled so the plain dof dot product reproduces
// hs_inner: with coeffs = DFT/N, Parseval gives u . v = N sum_k u_k v_k*,
// so the spectral multiplier picks up a 1/N.
VectorXd ConstraintSystem::apply_inverse_gram(const VectorXd& dual) const {
  const int n = grid_size_;
  const VectorXd mult = gram_multipliers(n, s_);
  VectorXd out(dual.size());
  for (int c = 0; c < ambient_dim_; ++c) {
    VectorXcd coeffs = fourier::coeffs(dual.segment(c * n, n));
    for (int j = 0; j < n; ++j) coeffs[j] *= n / mult[j];
    out.segment(c * n, n) = fourier::values(coeffs);
  }
  return out;
}

VectorXd ConstraintSystem::apply_gram(const VectorXd& primal) const {
  const int n = grid_size_;
  const VectorXd mult = gram_multipliers(n, s_);
  VectorXd out(primal.size());
  for (int c = 0; c < ambient_dim_; ++c) {
    VectorXcd coeffs = fourier::coeffs(primal.segment(c * n, n));
    for (int j = 0; j < n; ++j) coeffs[j] *= mult[j] / n;
    out.segment(c * n, n) = fourier::values(coeffs);
  }
  return out;
}

void ConstraintSystem::check_shape(const Field& h, const char* where) const {
  if (h.values.rows() != grid_size_ || h.values.cols() != ambient_dim_) {
    throw ConfigError(std::string(where) + ": field shape " +
                      std::to_string(h.values.rows()) + "x" +
                      std::to_string(h.values.cols()) +
                      " does not match the constraint system (" +
                      std::to_string(grid_size_) + "x" + std::to_string(ambient_dim_) + ")");
  }
}

VectorXd ConstraintSystem::residual(const Field& h) const {
  check_shape(h, "constraint residual");
  return rows_ * flatten_field(h.values);
}

Field ConstraintSystem::project(const Field& h) const {
  check_shape(h, "constraint projection");
  // h minus the H^s-orthogonal correction A^{-1} C^T mu, C h = C A^{-1} C^T mu
  const VectorXd ch = rows_ * flatten_field(h.values);
  const VectorXd mu = schur_.solve(ch);
  const VectorXd corrected = flatten_field(h.values) - inv_gram_rows_ * mu;
  return Field(unflatten_field(corrected, grid_size_, ambient_dim_));
}

Field ConstraintSystem::constrained_riesz(const Field& density) const {
  check_shape(density, "constrained riesz solve");
  // saddle system: A g + C^T mu = F, C g = 0, with F the dual vector of
  // the (1/N) pairing
  const VectorXd F = flatten_field(density.values) / grid_size_;
  const VectorXd ainv_f = apply_inverse_gram(F);
  const VectorXd mu = schur_.solve(rows_ * ainv_f);
  const VectorXd g = ainv_f - inv_gram_rows_ * mu;
  return Field(unflatten_field(g, grid_size_, ambient_dim_));
}

MatrixXd ConstraintSystem::null_basis() const {
  const int total = grid_size_ * ambient_dim_;
  Eigen::FullPivLU<MatrixXd> lu(rows_);
  lu.setThreshold(1e-10);
  MatrixXd kernel = lu.kernel();
  if (kernel.cols() == 1 && kernel.isZero(0.0)) {
    throw LinearAlgebraError("constraint system has no null space");
  }

  // modified Gram-Schmidt in the H^s inner product, with caching of the
  // Gram-applied columns; a second pass guards against loss of
  // orthogonality
  const int m = static_cast<int>(kernel.cols());
  MatrixXd basis(total, m);
  MatrixXd applied(total, m);
  int kept = 0;
  for (int c = 0; c < m; ++c) {
    VectorXd v = kernel.col(c);
    for (int pass = 0; pass < 2; ++pass) {
      for (int k = 0; k < kept; ++k) {
        v -= basis.col(k) * applied.col(k).dot(v);
      }
    }
    const double norm2 = v.dot(apply_gram(v));
    if (norm2 <= 1e-20) continue; // dependent column
    const double inv = 1.0 / std::sqrt(norm2);
    basis.col(kept) = v * inv;
    applied.col(kept) = apply_gram(basis.col(kept));
    ++kept;
  }
  return basis.leftCols(kept);
}

TangentBasis tangent_basis(const Curve& curve, double s) {
  ConstraintSystem sys(curve, s);
  TangentBasis out;
  out.columns = sys.null_basis();
  out.s = s;
  out.grid_size = curve.grid_size();
  out.ambient_dim = curve.ambient_dim();
  return out;
}

Field project_tangent(const Curve& curve, const Field& h, double s) {
  if (h.grid_size() != curve.grid_size() || h.ambient_dim() != curve.ambient_dim()) {
    throw ConfigError("field shape does not match curve");
  }
  return ConstraintSystem(curve, s).project(h);
}

GradientResult constrained_gradient(const Curve& curve, const SobolevOrder& order,
                                    const QuadratureGrid& grid) {
  const Field density = d_tp(curve, order, grid);
  ConstraintSystem sys(curve, order.s);
  GradientResult res{sys.constrained_riesz(density), 0.0, 0.0};
  res.norm_hs = std::sqrt(std::max(0.0, hs_inner(res.gradient, res.gradient, order.s)));
  res.pairing = pair_density(density, res.gradient);
  return res;
}

} // namespace tpflow

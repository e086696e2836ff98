#include "tpflow/energy.hpp"

#include "tpflow/errors.hpp"
#include "tpflow/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace tpflow {
namespace {

constexpr double kHeadCell = 1e-9;

// Moments int_a^b w^(e + r) dw for r = 0..3.
void cell_moments(double a, double b, double e, double m[4]) {
  for (int r = 0; r < 4; ++r) {
    const double q = e + r + 1.0;
    m[r] = (q == 0.0) ? std::log(b / a) : (std::pow(b, q) - std::pow(a, q)) / q;
  }
}

} // namespace

namespace detail {

void gauss_cell_weighted(double a, double b, double e, double nodes[2], double weights[2]) {
  double m[4];
  cell_moments(a, b, e, m);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  // centered moments mt_r = int ((w - mid)/half)^r w^e dw
  double mt[4];
  mt[0] = m[0];
  mt[1] = (m[1] - mid * m[0]) / half;
  mt[2] = (m[2] - 2.0 * mid * m[1] + mid * mid * m[0]) / (half * half);
  mt[3] = (m[3] - 3.0 * mid * m[2] + 3.0 * mid * mid * m[1] - mid * mid * mid * m[0]) /
          (half * half * half);
  // monic t^2 + c1 t + c0 orthogonal to 1 and t
  const double det = mt[0] * mt[2] - mt[1] * mt[1];
  if (det <= 0.0) throw LinearAlgebraError("quadrature cell moment matrix degenerate");
  const double c0 = (-mt[2] * mt[2] + mt[1] * mt[3]) / det;
  const double c1 = (-mt[0] * mt[3] + mt[1] * mt[2]) / det;
  const double disc = c1 * c1 - 4.0 * c0;
  if (disc <= 0.0) throw LinearAlgebraError("quadrature cell nodes not real");
  const double rt = std::sqrt(disc);
  const double t0 = 0.5 * (-c1 - rt);
  const double t1 = 0.5 * (-c1 + rt);
  // weights reproduce mt_0 and mt_1
  const double w1 = (mt[1] - t0 * mt[0]) / (t1 - t0);
  const double w0 = mt[0] - w1;
  if (w0 <= 0.0 || w1 <= 0.0) throw LinearAlgebraError("quadrature cell weight not positive");
  nodes[0] = mid + half * t0;
  nodes[1] = mid + half * t1;
  weights[0] = w0;
  weights[1] = w1;
}

} // namespace detail

QuadratureGrid QuadratureGrid::build(double p, int cells_per_level, double head) {
  if (p <= 4.0 || p >= 5.0) throw ConfigError("quadrature exponent p must lie in (4, 5)");
  if (cells_per_level < 1) throw ConfigError("quadrature needs at least one cell per level");
  if (head <= 0.0 || head >= 0.25) throw ConfigError("quadrature head cell out of range");
  const double e = 4.0 - p; // in (-1, 0)

  std::vector<double> pos_nodes, pos_weights;
  double hi = 0.5;
  while (hi > head) {
    const double lo = std::max(hi * 0.5, head);
    const double step = (hi - lo) / cells_per_level;
    for (int c = 0; c < cells_per_level; ++c) {
      const double a = lo + step * c;
      const double b = (c + 1 == cells_per_level) ? hi : lo + step * (c + 1);
      double n[2], w[2];
      detail::gauss_cell_weighted(a, b, e, n, w);
      pos_nodes.push_back(n[0]);
      pos_nodes.push_back(n[1]);
      pos_weights.push_back(w[0]);
      pos_weights.push_back(w[1]);
    }
    hi = lo;
  }
  // closing cell (0, head]: one node at the weighted centroid
  pos_nodes.push_back(head * (5.0 - p) / (6.0 - p));
  pos_weights.push_back(std::pow(head, 5.0 - p) / (5.0 - p));

  const int m = static_cast<int>(pos_nodes.size());
  std::vector<int> perm(static_cast<size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(),
            [&](int a, int b) { return pos_nodes[static_cast<size_t>(a)] <
                                       pos_nodes[static_cast<size_t>(b)]; });

  QuadratureGrid g;
  g.p_ = p;
  g.offsets_.resize(2 * m);
  g.weight_singular_.resize(2 * m);
  g.weight_plain_.resize(2 * m);
  // ascending order: mirrored negatives first
  for (int i = 0; i < m; ++i) {
    const size_t src = static_cast<size_t>(perm[static_cast<size_t>(i)]);
    g.offsets_[m - 1 - i] = -pos_nodes[src];
    g.offsets_[m + i] = pos_nodes[src];
    g.weight_singular_[m - 1 - i] = pos_weights[src];
    g.weight_singular_[m + i] = pos_weights[src];
  }
  for (int i = 0; i < 2 * m; ++i) {
    g.weight_plain_[i] = g.weight_singular_[i] * std::pow(std::abs(g.offsets_[i]), p - 4.0);
  }
  return g;
}

QuadratureGrid QuadratureGrid::for_energy(const SobolevOrder& order, int grid_size) {
  if (grid_size < 8) throw ConfigError("quadrature grid needs N >= 8");
  const int cells = std::max(1, grid_size / 32);
  return build(order.singular_power(), cells, kHeadCell);
}

double QuadratureGrid::singular_mass() const {
  return 2.0 * std::pow(0.5, 5.0 - p_) / (5.0 - p_);
}

QuadratureGrid QuadratureGrid::scaled_weight(int index, double factor) const {
  if (index < 0 || index >= size()) throw ConfigError("weight index out of range");
  QuadratureGrid out(*this);
  out.weight_singular_[index] *= factor;
  out.weight_plain_[index] *= factor;
  return out;
}

namespace detail {

void field_trace(const Field& h, double w, FieldTrace& out) {
  const int dim = h.ambient_dim();
  out.yder.resize(h.grid_size(), dim);
  out.ydiff.resize(h.grid_size(), dim);
  for (int c = 0; c < dim; ++c) {
    out.yder.col(c) = fourier::shifted_values(h.deriv_coeffs[static_cast<size_t>(c)], w);
    out.ydiff.col(c) = fourier::shifted_difference(h.coeffs[static_cast<size_t>(c)], w);
  }
}

void offset_geometry(const Curve& curve, const QuadratureGrid& grid, int j,
                     OffsetGeometry& out, double floor_fraction) {
  const int n = curve.grid_size();
  const int dim = curve.ambient_dim();
  const double w = grid.offsets()[j];

  out.w = w;
  out.weight = grid.weight_plain()[j];
  out.yder.resize(n, dim);
  out.dgam.resize(n, dim);
  for (int c = 0; c < dim; ++c) {
    out.yder.col(c) = fourier::shifted_values(curve.deriv_coeffs()[static_cast<size_t>(c)], w);
    // chords from the spectral difference, not value minus node: the direct
    // subtraction loses all significant digits once |w| is far below the
    // grid spacing, and the projected defect below is O(w^2)
    out.dgam.col(c) = fourier::shifted_difference(curve.coeffs()[static_cast<size_t>(c)], w);
  }
  out.dist = out.dgam.rowwise().norm();
  out.speed_y = out.yder.rowwise().norm();

  const double len = curve.length();
  if (std::abs(w) >= 2.0 / n) {
    for (int i = 0; i < n; ++i) {
      if (out.dist[i] < floor_fraction * len) {
        throw SelfIntersectionError(
            "chord collapse: |gamma(x+w) - gamma(x)| < " + std::to_string(floor_fraction) +
                " * length at node " + std::to_string(i) + ", offset " + std::to_string(w),
            i, w);
      }
    }
  } else {
    // near the diagonal only exact degeneracy is fatal
    for (int i = 0; i < n; ++i) {
      if (out.dist[i] <= 0.0) {
        throw SelfIntersectionError("degenerate zero chord at node " + std::to_string(i), i, w);
      }
    }
  }
  if (out.speed_y.minCoeff() <= 1e-10 * len) {
    throw ConfigError("interpolant speed vanishes off-grid; curve is not resolved");
  }

  out.tangency.resize(n);
  out.lgg.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    const double sx = curve.speed()[i];
    const VectorXd u = curve.deriv().row(i).transpose() / sx;
    const double a = u.dot(out.dgam.row(i).transpose());
    out.tangency[i] = a;
    out.lgg.row(i) = out.dgam.row(i) - a * u.transpose();
  }
  out.lgg_sq = out.lgg.rowwise().squaredNorm();
  out.mu = (out.weight / n) *
           (curve.speed().array() * out.speed_y.array() / out.dist.array()).matrix();
}

} // namespace detail

double tp_energy(const Curve& curve, const SobolevOrder& order, const QuadratureGrid& grid) {
  const double s2 = 2.0 * order.s;
  if (std::abs(grid.p() - order.singular_power()) > 1e-12) {
    throw ConfigError("quadrature grid exponent does not match the energy order");
  }
  const int nw = grid.size();
  const int jblock = 4;
  const int blocks = (nw + jblock - 1) / jblock;
  return reduce::parallel_block_sum(blocks, [&](int b) {
    detail::OffsetGeometry geo;
    std::vector<double> acc;
    for (int j = b * jblock; j < std::min(nw, (b + 1) * jblock); ++j) {
      detail::offset_geometry(curve, grid, j, geo);
      const VectorXd term =
          (geo.lgg_sq.array() / geo.dist.array().pow(s2) * geo.mu.array()).matrix();
      acc.insert(acc.end(), term.data(), term.data() + term.size());
    }
    return reduce::pairwise_sum(acc);
  });
}

double tp_energy_classical(const Curve& curve, double q) {
  if (q <= 0.0) throw ConfigError("classical energy exponent q must be positive");
  const int n = curve.grid_size();
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(n) * n);
  // second derivative for the diagonal curvature limit
  MatrixXd second(n, curve.ambient_dim());
  for (int c = 0; c < curve.ambient_dim(); ++c) {
    second.col(c) = fourier::derivative(curve.deriv().col(c));
  }
  for (int i = 0; i < n; ++i) {
    const double sx = curve.speed()[i];
    const VectorXd tang = curve.deriv().row(i).transpose();
    const VectorXd u = tang / sx;
    for (int j = 0; j < n; ++j) {
      double inv_r;
      if (i == j) {
        const VectorXd acc = second.row(i).transpose();
        inv_r = (acc - u * u.dot(acc)).norm() / (sx * sx);
      } else {
        const double r = tangent_point_radius(
            VectorXd((curve.nodes().row(j) - curve.nodes().row(i)).transpose()), tang);
        inv_r = std::isinf(r) ? 0.0 : 1.0 / r;
      }
      terms.push_back(std::pow(inv_r, q) * sx * curve.speed()[j] /
                      (static_cast<double>(n) * n));
    }
  }
  return reduce::pairwise_sum(terms);
}

IntegrandFactors integrand_factors(const Curve& curve, const SobolevOrder& order,
                                   const QuadratureGrid& grid) {
  const int n = curve.grid_size();
  const int dim = curve.ambient_dim();
  const int nw = grid.size();
  const double s = order.s;
  const double p = order.singular_power();

  IntegrandFactors out;
  out.f_component.assign(static_cast<size_t>(dim), MatrixXd(n, nw));
  out.lambda.resize(n, nw);
  out.psi.resize(n, nw);

  // periodic part of the arc-length antiderivative
  const VectorXcd speed_coeffs = fourier::coeffs(curve.speed());
  const VectorXcd anti = fourier::antiderivative_coeffs(speed_coeffs);
  const VectorXd anti_grid = fourier::values(anti);
  const double len = curve.length();

  detail::OffsetGeometry geo;
  for (int j = 0; j < nw; ++j) {
    detail::offset_geometry(curve, grid, j, geo);
    const double w = geo.w;
    const double scale = std::pow(std::abs(w), -s - 0.5);
    const VectorXd anti_shift = fourier::shifted_values(anti, w);
    for (int i = 0; i < n; ++i) {
      const double sx = curve.speed()[i];
      const VectorXd u = curve.deriv().row(i).transpose() / sx;
      // arc length from x to x+w along the interpolant
      const double arc = len * w + anti_shift[i] - anti_grid[i];
      // H1 keeps the arc-length term; H2 cancels it against the chord
      const VectorXd h1 = scale * (geo.dgam.row(i).transpose() - u * arc);
      const VectorXd f = h1 - u * u.dot(h1);
      for (int c = 0; c < dim; ++c) out.f_component[static_cast<size_t>(c)](i, j) = f[c];
      out.lambda(i, j) = std::pow(std::abs(w) / geo.dist[i], 0.5 * p);
      out.psi(i, j) = std::sqrt(sx * geo.speed_y[i]);
    }
  }
  return out;
}

} // namespace tpflow

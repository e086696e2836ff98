#include "tpflow/variation.hpp"

#include "tpflow/errors.hpp"
#include "tpflow/fourier.hpp"
#include "tpflow/reduce.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <span>
#include <sstream>

namespace tpflow {
namespace {

using detail::FieldTrace;
using detail::OffsetGeometry;

constexpr int kOffsetBlock = 4;

void check_field(const Curve& curve, const Field& f, const char* what) {
  if (f.grid_size() != curve.grid_size() || f.ambient_dim() != curve.ambient_dim()) {
    throw ConfigError(std::string(what) + ": field shape does not match curve");
  }
}

void check_grid(const SobolevOrder& order, const QuadratureGrid& grid) {
  if (std::abs(grid.p() - order.singular_power()) > 1e-12) {
    throw ConfigError("quadrature grid exponent does not match the energy order");
  }
}

double tangency_defect(const Curve& curve, const Field& k) {
  double worst = 0.0;
  for (int i = 0; i < curve.grid_size(); ++i) {
    worst = std::max(worst, std::abs(curve.deriv().row(i).dot(k.deriv.row(i))));
  }
  const double scale =
      curve.speed().maxCoeff() * std::max(k.deriv.rowwise().norm().maxCoeff(), 1e-300);
  return worst / scale;
}

void require_tangent(const Curve& curve, const Field& k, const char* what) {
  const double defect = tangency_defect(curve, k);
  if (defect > 1e-10) {
    throw ConfigError(std::string(what) +
                      ": direction field is not tangent (relative defect " +
                      std::to_string(defect) + ", tolerance 1e-10)");
  }
}

void require_arclength(const Curve& curve, const char* what) {
  const double dev = (curve.speed().array() / curve.length() - 1.0).abs().maxCoeff();
  if (dev > 1e-6) {
    throw ConfigError(std::string(what) + ": curve speed deviates from constant by " +
                      std::to_string(dev) + "; reparametrize first");
  }
}

// Chord defect rows of a field against precomputed geometry:
//   L(h)_i = h(x_i + w) - h(x_i) - (a_i / sx_i) h'(x_i)
MatrixXd defect_rows(const Curve& curve, const OffsetGeometry& geo, const Field& h,
                     const FieldTrace& tr) {
  MatrixXd L = tr.ydiff;
  const VectorXd coef = (geo.tangency.array() / curve.speed().array()).matrix();
  L -= coef.asDiagonal() * h.deriv;
  return L;
}

double offset_sweep(const QuadratureGrid& grid,
                    const std::function<double(int, OffsetGeometry&)>& term) {
  const int nw = grid.size();
  const int blocks = (nw + kOffsetBlock - 1) / kOffsetBlock;
  return reduce::parallel_block_sum(blocks, [&](int b) {
    OffsetGeometry geo;
    std::vector<double> acc;
    for (int j = b * kOffsetBlock; j < std::min(nw, (b + 1) * kOffsetBlock); ++j) {
      acc.push_back(term(j, geo));
    }
    return reduce::pairwise_sum(acc);
  });
}

double row_sum(const VectorXd& term) {
  return reduce::pairwise_sum(std::span<const double>(term.data(),
                                                      static_cast<size_t>(term.size())));
}

std::uint64_t fnv1a(const void* data, size_t bytes, std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

} // namespace

double b1_form(const Curve& curve, const Field& h, const Field& k, const SobolevOrder& order,
               const QuadratureGrid& grid) {
  check_field(curve, h, "b1");
  check_field(curve, k, "b1");
  check_grid(order, grid);
  const double s2 = 2.0 * order.s;
  return offset_sweep(grid, [&](int j, OffsetGeometry& geo) {
    detail::offset_geometry(curve, grid, j, geo);
    FieldTrace th, tk;
    detail::field_trace(h, geo.w, th);
    detail::field_trace(k, geo.w, tk);
    const MatrixXd lh = defect_rows(curve, geo, h, th);
    const MatrixXd lk = defect_rows(curve, geo, k, tk);
    const VectorXd term = ((lh.array() * lk.array()).rowwise().sum() /
                           geo.dist.array().pow(s2) * geo.mu.array())
                              .matrix();
    return row_sum(term);
  });
}

namespace {

double b2_impl(const Curve& curve, const Field& h, const Field& k, const SobolevOrder& order,
               const QuadratureGrid& grid, double eps) {
  check_field(curve, h, "b2");
  check_field(curve, k, "b2");
  check_grid(order, grid);
  std::mutex energy_mutex;
  double energy_acc = 0.0;
  const double value = offset_sweep(grid, [&](int j, OffsetGeometry& geo) {
    detail::offset_geometry(curve, grid, j, geo);
    FieldTrace th, tk;
    detail::field_trace(h, geo.w, th);
    detail::field_trace(k, geo.w, tk);
    const MatrixXd& dh = th.ydiff;
    const MatrixXd& dk = tk.ydiff;
    VectorXd phi2;
    if (eps == 0.0) {
      phi2 = (geo.lgg_sq.array() / geo.dist.array().pow(2.0 * order.s)).matrix();
    } else {
      // symmetric exponent split across the two defect factors
      phi2 = (geo.lgg_sq.array() * geo.dist.array().pow(order.s + eps).inverse() *
              geo.dist.array().pow(order.s - eps).inverse())
                 .matrix();
    }
    const VectorXd term = (phi2.array() * (dh.array() * dk.array()).rowwise().sum() /
                           geo.dist.array().square() * geo.mu.array())
                              .matrix();
    const double e_part = (phi2.array() * geo.mu.array()).sum();
    {
      std::lock_guard<std::mutex> lock(energy_mutex);
      energy_acc += e_part;
    }
    return row_sum(term);
  });
  // |B2(h,k)| is controlled by the squared bi-Lipschitz constant times
  // the energy; generous slack covers the discrete sup norms
  const double bilip = distortion(curve);
  const double bound = 1.5 * bilip * bilip * h.deriv.rowwise().norm().maxCoeff() *
                           k.deriv.rowwise().norm().maxCoeff() * energy_acc +
                       1e-12;
  if (std::abs(value) > bound) {
    throw LinearAlgebraError("b2 exceeds its distortion bound; assembly inconsistent");
  }
  return value;
}

} // namespace

double b2_form(const Curve& curve, const Field& h, const Field& k, const SobolevOrder& order,
               const QuadratureGrid& grid) {
  return b2_impl(curve, h, k, order, grid, 0.0);
}

double b2_form_split(const Curve& curve, const Field& h, const Field& k,
                     const SobolevOrder& order, const QuadratureGrid& grid, double eps) {
  if (!(std::abs(eps) < 0.5)) throw ConfigError("b2 exponent split must satisfy |eps| < 1/2");
  return b2_impl(curve, h, k, order, grid, eps);
}

double b3_form(const Curve& curve, const Field& h, const Field& k, const SobolevOrder& order,
               const QuadratureGrid& grid) {
  check_field(curve, h, "b3");
  check_field(curve, k, "b3");
  check_grid(order, grid);
  const double s2 = 2.0 * order.s;
  const VectorXd sx2 = curve.speed().array().square().matrix();
  return offset_sweep(grid, [&](int j, OffsetGeometry& geo) {
    detail::offset_geometry(curve, grid, j, geo);
    FieldTrace th, tk;
    detail::field_trace(h, geo.w, th);
    detail::field_trace(k, geo.w, tk);
    const VectorXd phi2 = (geo.lgg_sq.array() / geo.dist.array().pow(s2)).matrix();
    const VectorXd ddx =
        ((h.deriv.array() * k.deriv.array()).rowwise().sum() / sx2.array()).matrix();
    const VectorXd ddy = ((th.yder.array() * tk.yder.array()).rowwise().sum() /
                          geo.speed_y.array().square())
                             .matrix();
    const VectorXd term =
        (phi2.array() * (ddx.array() + ddy.array()) * geo.mu.array()).matrix();
    return row_sum(term);
  });
}

double pair_density(const Field& density, const Field& h) {
  if (density.grid_size() != h.grid_size() || density.ambient_dim() != h.ambient_dim()) {
    throw ConfigError("density and field shapes do not match");
  }
  return (density.values.array() * h.values.array()).sum() / density.grid_size();
}

Field d_tp(const Curve& curve, const SobolevOrder& order, const QuadratureGrid& grid) {
  check_grid(order, grid);
  const int n = curve.grid_size();
  const int dim = curve.ambient_dim();
  const double s2 = 2.0 * order.s;
  const double p = order.singular_power();
  const int nw = grid.size();
  const int blocks = (nw + kOffsetBlock - 1) / kOffsetBlock;

  // accumulator rows [0, n): value slots (direct plus pulled back from
  // shifted positions); rows [n, 2n): derivative-at-x slots, mapped
  // through the differentiation adjoint at the end
  const MatrixXd acc =
      reduce::parallel_block_matrix_sum(blocks, 2 * n, dim, [&](int b, MatrixXd& out) {
        OffsetGeometry geo;
        for (int j = b * kOffsetBlock; j < std::min(nw, (b + 1) * kOffsetBlock); ++j) {
          detail::offset_geometry(curve, grid, j, geo);
          const VectorXd inv_pow = geo.dist.array().pow(s2).inverse().matrix();
          const VectorXd c1 = (geo.mu.array() * inv_pow.array()).matrix();
          const VectorXd phi2 = (geo.lgg_sq.array() * inv_pow.array()).matrix();
          const VectorXd c2 =
              ((-p) * geo.mu.array() * phi2.array() / geo.dist.array().square()).matrix();
          const VectorXd c3 = (geo.mu.array() * phi2.array()).matrix();

          // coefficients against h(x_i + w) - h(x_i); the two slots must
          // stay coupled: separately they are order dist^{-2s-1} and their
          // cancellation at head offsets would drown in transform roundoff
          MatrixXd gval = (2.0 * c1).asDiagonal() * geo.lgg;
          gval.noalias() += c2.asDiagonal() * geo.dgam;

          // coefficients against h'(x_i): defect tangent term and the
          // speed factor of the measure
          const VectorXd cdef =
              (2.0 * c1.array() * geo.tangency.array() / curve.speed().array()).matrix();
          out.bottomRows(n) -= cdef.asDiagonal() * geo.lgg;
          const VectorXd cspd = (c3.array() / curve.speed().array().square()).matrix();
          out.bottomRows(n) += cspd.asDiagonal() * curve.deriv();

          // pull the difference slot back through the difference adjoint
          // (factors e^{-i 2 pi k w} - 1) and the h'(x_i + w) slot through
          // the shift and differentiation adjoints
          const VectorXd cy = (c3.array() / geo.speed_y.array().square()).matrix();
          const MatrixXd gdy = cy.asDiagonal() * geo.yder;
          for (int c = 0; c < dim; ++c) {
            VectorXcd cv = fourier::coeffs(gval.col(c));
            VectorXcd cd = fourier::coeffs(gdy.col(c));
            VectorXcd pulled(n);
            for (int bin = 0; bin < n; ++bin) {
              const int freq = fourier::bin_frequency(bin, n);
              const std::complex<double> dphase = fourier::phase_difference(freq, n, -geo.w);
              std::complex<double> phase;
              std::complex<double> dmult(0.0, 0.0);
              if (2 * freq == -n) {
                phase = std::cos(-2.0 * M_PI * 0.5 * n * geo.w);
              } else {
                const double ang = -2.0 * M_PI * freq * geo.w;
                phase = std::complex<double>(std::cos(ang), std::sin(ang));
                dmult = std::complex<double>(0.0, 2.0 * M_PI * freq);
              }
              pulled[bin] = dphase * cv[bin] - phase * dmult * cd[bin];
            }
            out.col(c).head(n) += fourier::values(pulled);
          }
        }
      });

  MatrixXd density = acc.topRows(n);
  // derivative-at-x slots: sum_i <B_i, (Dh)_i> = sum_i <-(D B)_i, h_i>
  density.noalias() -= fourier::derivative_cols(acc.bottomRows(n));
  return Field(density * static_cast<double>(n));
}

double db1_form(const Curve& curve, const Field& psi1, const Field& psi2, const Field& k,
                const SobolevOrder& order, const QuadratureGrid& grid) {
  check_field(curve, psi1, "db1");
  check_field(curve, psi2, "db1");
  check_field(curve, k, "db1");
  check_grid(order, grid);
  const double s2 = 2.0 * order.s;
  const double p = order.singular_power();
  const VectorXd inv_sx = curve.speed().array().inverse().matrix();
  const MatrixXd u_rows = inv_sx.asDiagonal() * curve.deriv();
  return offset_sweep(grid, [&](int j, OffsetGeometry& geo) {
    detail::offset_geometry(curve, grid, j, geo);
    FieldTrace t1, t2, tk;
    detail::field_trace(psi1, geo.w, t1);
    detail::field_trace(psi2, geo.w, t2);
    detail::field_trace(k, geo.w, tk);
    const MatrixXd l1 = defect_rows(curve, geo, psi1, t1);
    const MatrixXd l2 = defect_rows(curve, geo, psi2, t2);
    const MatrixXd lk = defect_rows(curve, geo, k, tk);
    const VectorXd inv_pow = geo.dist.array().pow(s2).inverse().matrix();

    const VectorXd pair12 = (l1.array() * l2.array()).rowwise().sum();
    const VectorXd s2k =
        ((geo.dgam.array() * tk.ydiff.array()).rowwise().sum()).matrix();
    const VectorXd t_first = ((-p) * pair12.array() * inv_pow.array() * s2k.array() /
                              geo.dist.array().square() * geo.mu.array())
                                 .matrix();

    const VectorXd mult = ((l1.array() * psi2.deriv.array()).rowwise().sum() * inv_sx.array() +
                           (l2.array() * psi1.deriv.array()).rowwise().sum() * inv_sx.array())
                              .matrix();
    const VectorXd bk = ((k.deriv.array() * geo.lgg.array()).rowwise().sum() * inv_sx.array() +
                         (u_rows.array() * lk.array()).rowwise().sum())
                            .matrix();
    const VectorXd t_cross =
        (-(mult.array() * bk.array()) * inv_pow.array() * geo.mu.array()).matrix();
    return row_sum((t_first + t_cross).eval());
  });
}

namespace {

double db2_impl(const Curve& curve, const Field& psi1, const Field& psi2, const Field& k,
                const SobolevOrder& order, const QuadratureGrid& grid, double eps) {
  check_field(curve, psi1, "db2");
  check_field(curve, psi2, "db2");
  check_field(curve, k, "db2");
  check_grid(order, grid);
  require_tangent(curve, k, "db2");
  const double s2 = 2.0 * order.s;
  return offset_sweep(grid, [&](int j, OffsetGeometry& geo) {
    detail::offset_geometry(curve, grid, j, geo);
    FieldTrace t1, t2, tk;
    detail::field_trace(psi1, geo.w, t1);
    detail::field_trace(psi2, geo.w, t2);
    detail::field_trace(k, geo.w, tk);
    const MatrixXd lk = defect_rows(curve, geo, k, tk);

    const VectorXd dd12 =
        ((t1.ydiff.array() * t2.ydiff.array()).rowwise().sum() /
         geo.dist.array().square())
            .matrix();
    const VectorXd s2k =
        ((geo.dgam.array() * tk.ydiff.array()).rowwise().sum()).matrix();
    const VectorXd lk_dot = ((geo.lgg.array() * lk.array()).rowwise().sum()).matrix();

    VectorXd cross_pow, curve_pow;
    if (eps == 0.0) {
      cross_pow = geo.dist.array().pow(s2).inverse().matrix();
      curve_pow = cross_pow;
    } else {
      // split exponents s +/- eps on the two singular factors
      const VectorXd lo = geo.dist.array().pow(order.s - eps).inverse().matrix();
      const VectorXd hi = geo.dist.array().pow(order.s + eps).inverse().matrix();
      cross_pow = (lo.array() * hi.array()).matrix();
      curve_pow = cross_pow;
    }
    const VectorXd term =
        (geo.mu.array() * dd12.array() *
         (2.0 * lk_dot.array() * cross_pow.array() -
          (s2 + 3.0) * geo.lgg_sq.array() * curve_pow.array() * s2k.array() /
              geo.dist.array().square()))
            .matrix();
    return row_sum(term);
  });
}

} // namespace

double db2_form(const Curve& curve, const Field& psi1, const Field& psi2, const Field& k,
                const SobolevOrder& order, const QuadratureGrid& grid) {
  return db2_impl(curve, psi1, psi2, k, order, grid, 0.0);
}

double db2_form_split(const Curve& curve, const Field& psi1, const Field& psi2, const Field& k,
                      const SobolevOrder& order, const QuadratureGrid& grid, double eps) {
  if (!(std::abs(eps) < 0.5)) throw ConfigError("db2 exponent split must satisfy |eps| < 1/2");
  return db2_impl(curve, psi1, psi2, k, order, grid, eps);
}

double db3_form(const Curve& curve, const Field& psi1, const Field& psi2, const Field& k,
                const SobolevOrder& order, const QuadratureGrid& grid) {
  check_field(curve, psi1, "db3");
  check_field(curve, psi2, "db3");
  check_field(curve, k, "db3");
  check_grid(order, grid);
  const double s2 = 2.0 * order.s;
  const VectorXd sx2 = curve.speed().array().square().matrix();
  return offset_sweep(grid, [&](int j, OffsetGeometry& geo) {
    detail::offset_geometry(curve, grid, j, geo);
    FieldTrace t1, t2, tk;
    detail::field_trace(psi1, geo.w, t1);
    detail::field_trace(psi2, geo.w, t2);
    detail::field_trace(k, geo.w, tk);
    const MatrixXd lk = defect_rows(curve, geo, k, tk);
    const VectorXd sy2 = geo.speed_y.array().square().matrix();

    const VectorXd ddx =
        ((psi1.deriv.array() * psi2.deriv.array()).rowwise().sum() / sx2.array()).matrix();
    const VectorXd ddy =
        ((t1.yder.array() * t2.yder.array()).rowwise().sum() / sy2.array()).matrix();
    const VectorXd tx =
        ((curve.deriv().array() * k.deriv.array()).rowwise().sum() / sx2.array()).matrix();
    const VectorXd ty =
        ((geo.yder.array() * tk.yder.array()).rowwise().sum() / sy2.array()).matrix();

    const VectorXd lk_dot = ((geo.lgg.array() * lk.array()).rowwise().sum()).matrix();
    const VectorXd s2k =
        ((geo.dgam.array() * tk.ydiff.array()).rowwise().sum()).matrix();
    const VectorXd inv_pow = geo.dist.array().pow(s2).inverse().matrix();

    // derivative of the density |Phi|^2 rho in direction k
    const VectorXd alpha =
        (geo.mu.array() * inv_pow.array() *
         (2.0 * lk_dot.array() -
          (s2 + 1.0) * geo.lgg_sq.array() * s2k.array() / geo.dist.array().square() +
          geo.lgg_sq.array() * (tx.array() + ty.array())))
            .matrix();
    const VectorXd term =
        (alpha.array() * (ddx.array() + ddy.array()) -
         2.0 * geo.mu.array() * geo.lgg_sq.array() * inv_pow.array() *
             (ddx.array() * tx.array() + ddy.array() * ty.array()))
            .matrix();
    return row_sum(term);
  });
}

double db3_vanishes(const Curve& curve, const SobolevOrder& order, const QuadratureGrid& grid,
                    int samples, unsigned long long seed) {
  if (samples < 1) throw ConfigError("db3_vanishes needs at least one sample");
  const Field base(curve.nodes());
  double worst = 0.0;
  for (int trial = 0; trial < samples; ++trial) {
    Field h = project_tangent(
        curve, make_random_field(curve.grid_size(), curve.ambient_dim(), 6, seed + 2 * trial),
        order.s);
    Field k = project_tangent(
        curve,
        make_random_field(curve.grid_size(), curve.ambient_dim(), 6, seed + 2 * trial + 1),
        order.s);
    const double nh = std::sqrt(hs_norm_sq(h, order.s));
    const double nk = std::sqrt(hs_norm_sq(k, order.s));
    if (nh <= 0.0 || nk <= 0.0) continue;
    h = Field(h.values / nh);
    k = Field(k.values / nk);
    worst = std::max(worst, std::abs(db3_form(curve, base, h, k, order, grid)));
  }
  return worst;
}

double d2_tp(const Curve& curve, const Field& h, const Field& k, const SobolevOrder& order,
             const QuadratureGrid& grid) {
  check_field(curve, h, "d2_tp");
  check_field(curve, k, "d2_tp");
  check_grid(order, grid);
  require_arclength(curve, "d2_tp");
  require_tangent(curve, h, "d2_tp");
  require_tangent(curve, k, "d2_tp");
  const double p = order.singular_power();
  const Field base(curve.nodes());
  return 2.0 * b1_form(curve, h, k, order, grid) - p * b2_form(curve, h, k, order, grid) +
         b3_form(curve, h, k, order, grid) + 2.0 * db1_form(curve, base, h, k, order, grid) -
         p * db2_form(curve, base, h, k, order, grid) +
         db3_form(curve, base, h, k, order, grid);
}

double curve_length(const Curve& curve) { return curve.length(); }

Field d_length(const Curve& curve) {
  const VectorXd inv_sx = curve.speed().array().inverse().matrix();
  const MatrixXd u_rows = inv_sx.asDiagonal() * curve.deriv();
  return Field(-fourier::derivative_cols(u_rows));
}

double d2_length(const Curve& curve, const Field& h, const Field& k) {
  check_field(curve, h, "d2_length");
  check_field(curve, k, "d2_length");
  const int n = curve.grid_size();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sx = curve.speed()[i];
    const VectorXd u = curve.deriv().row(i).transpose() / sx;
    const VectorXd hp = h.deriv.row(i).transpose();
    const VectorXd kp = k.deriv.row(i).transpose();
    acc += (hp.dot(kp) - u.dot(hp) * u.dot(kp)) / sx;
  }
  return acc / n;
}

double lagrange_multiplier(const Curve& curve, const SobolevOrder& order,
                           const QuadratureGrid& grid) {
  const Field f_energy = d_tp(curve, order, grid);
  const Field f_length = d_length(curve);
  const Field g_energy = riesz_solve(f_energy, order.s);
  const Field g_length = riesz_solve(f_length, order.s);
  const double num = pair_density(f_length, g_energy);
  const double den = pair_density(f_length, g_length);
  if (std::abs(den) < 1e-300) throw LinearAlgebraError("length differential vanishes");
  return -num / den;
}

double metric_g(const Curve& curve, const Field& h, const Field& k, const SobolevOrder& order,
                const QuadratureGrid& grid) {
  check_field(curve, h, "metric_g");
  check_field(curve, k, "metric_g");
  const int n = curve.grid_size();
  double local = 0.0;
  for (int i = 0; i < n; ++i) {
    const double sx = curve.speed()[i];
    local += sx * h.values.row(i).dot(k.values.row(i));
    local += h.deriv.row(i).dot(k.deriv.row(i)) / sx;
  }
  local /= n;
  return local + b1_form(curve, h, k, order, grid) + b2_form(curve, h, k, order, grid) +
         b3_form(curve, h, k, order, grid);
}

// ---------------------------------------------------------------------
// dense assembly on a basis of displacement fields

namespace {

struct ReducedForms {
  MatrixXd b1, b2, b3, db1, db2, db3;
  MatrixXd l2, dl2, d2len;
};

ReducedForms assemble_forms(const Curve& curve, const SobolevOrder& order,
                            const QuadratureGrid& grid, const MatrixXd& basis) {
  const int n = curve.grid_size();
  const int dim = curve.ambient_dim();
  const int m = static_cast<int>(basis.cols());
  if (basis.rows() != static_cast<long>(n) * dim) {
    throw ConfigError("basis rows do not match curve dof");
  }
  const double s2 = 2.0 * order.s;

  // per-component samples, coefficients, and derivative samples
  std::vector<MatrixXd> ex(static_cast<size_t>(dim));
  std::vector<Eigen::MatrixXcd> cc(static_cast<size_t>(dim)), dcc(static_cast<size_t>(dim));
  std::vector<MatrixXd> dx(static_cast<size_t>(dim));
  for (int c = 0; c < dim; ++c) {
    ex[static_cast<size_t>(c)] = basis.middleRows(c * n, n);
    cc[static_cast<size_t>(c)] = fourier::coeffs_cols(ex[static_cast<size_t>(c)]);
    dcc[static_cast<size_t>(c)] =
        fourier::derivative_coeffs_cols(cc[static_cast<size_t>(c)]);
    dx[static_cast<size_t>(c)] = fourier::values_cols(dcc[static_cast<size_t>(c)]);
  }
  const VectorXd inv_sx = curve.speed().array().inverse().matrix();
  const VectorXd inv_sx2 = curve.speed().array().square().inverse().matrix();
  const MatrixXd u_rows = inv_sx.asDiagonal() * curve.deriv();

  const int nw = grid.size();
  const int blocks = (nw + kOffsetBlock - 1) / kOffsetBlock;
  // stacked accumulator: six m x m slots plus the x-collapsed b3 weight
  const int slot_rows = 6 * m;
  const MatrixXd acc = reduce::parallel_block_matrix_sum(
      blocks, slot_rows + n, m, [&](int b, MatrixXd& out) {
        OffsetGeometry geo;
        for (int j = b * kOffsetBlock; j < std::min(nw, (b + 1) * kOffsetBlock); ++j) {
          detail::offset_geometry(curve, grid, j, geo);
          const VectorXd inv_pow = geo.dist.array().pow(s2).inverse().matrix();
          const VectorXd inv_d2 = geo.dist.array().square().inverse().matrix();
          const VectorXd c1 = (geo.mu.array() * inv_pow.array()).matrix();
          const VectorXd phi2w = (geo.mu.array() * geo.lgg_sq.array() * inv_pow.array()).matrix();
          const VectorXd sy2inv = geo.speed_y.array().square().inverse().matrix();
          const VectorXd acoef = (geo.tangency.array() * inv_sx.array()).matrix();

          MatrixXd s2m = MatrixXd::Zero(n, m);
          MatrixXd a1 = MatrixXd::Zero(n, m);
          MatrixXd v1 = MatrixXd::Zero(n, m);
          MatrixXd px = MatrixXd::Zero(n, m);
          MatrixXd py = MatrixXd::Zero(n, m);

          for (int c = 0; c < dim; ++c) {
            const MatrixXd wc =
                fourier::shifted_values_cols(dcc[static_cast<size_t>(c)], geo.w);
            const MatrixXd diffc =
                fourier::shifted_difference_cols(cc[static_cast<size_t>(c)], geo.w);
            const MatrixXd lc = diffc - acoef.asDiagonal() * dx[static_cast<size_t>(c)];

            out.block(0, 0, m, m).noalias() += lc.transpose() * (c1.asDiagonal() * lc);
            out.block(m, 0, m, m).noalias() +=
                diffc.transpose() * ((phi2w.array() * inv_d2.array()).matrix().asDiagonal() *
                                     diffc);
            out.block(2 * m, 0, m, m).noalias() +=
                wc.transpose() * ((phi2w.array() * sy2inv.array()).matrix().asDiagonal() * wc);

            s2m.noalias() += geo.dgam.col(c).asDiagonal() * diffc;
            a1.noalias() += geo.lgg.col(c).asDiagonal() * lc;
            v1.noalias() += (geo.lgg.col(c).array() * inv_sx.array()).matrix().asDiagonal() *
                            dx[static_cast<size_t>(c)];
            v1.noalias() += u_rows.col(c).asDiagonal() * lc;
            px.noalias() += (curve.deriv().col(c).array() * inv_sx2.array())
                                .matrix()
                                .asDiagonal() *
                            dx[static_cast<size_t>(c)];
            py.noalias() +=
                (geo.yder.col(c).array() * sy2inv.array()).matrix().asDiagonal() * wc;
          }

          // db1 slot
          out.block(3 * m, 0, m, m).noalias() +=
              -(s2 + 1.0) * a1.transpose() *
              ((c1.array() * inv_d2.array()).matrix().asDiagonal() * s2m);
          out.block(3 * m, 0, m, m).noalias() -= v1.transpose() * (c1.asDiagonal() * v1);
          // db2 slot
          out.block(4 * m, 0, m, m).noalias() +=
              -(s2 + 3.0) * s2m.transpose() *
              ((phi2w.array() * inv_d2.array() * inv_d2.array()).matrix().asDiagonal() * s2m);
          out.block(4 * m, 0, m, m).noalias() +=
              2.0 * s2m.transpose() * ((c1.array() * inv_d2.array()).matrix().asDiagonal() * a1);
          // db3 slot
          const MatrixXd dd = px + py;
          MatrixXd alpha = 2.0 * (c1.asDiagonal() * a1);
          alpha.noalias() -=
              (s2 + 1.0) * ((c1.array() * geo.lgg_sq.array() * inv_d2.array()).matrix()
                                .asDiagonal() *
                            s2m);
          alpha.noalias() += (c1.array() * geo.lgg_sq.array()).matrix().asDiagonal() * dd;
          out.block(5 * m, 0, m, m).noalias() += dd.transpose() * alpha;
          out.block(5 * m, 0, m, m).noalias() -= 2.0 * px.transpose() * (phi2w.asDiagonal() * px);
          out.block(5 * m, 0, m, m).noalias() -= 2.0 * py.transpose() * (phi2w.asDiagonal() * py);

          out.block(slot_rows, 0, n, 1) += phi2w;
        }
      });

  ReducedForms forms;
  forms.b1 = acc.block(0, 0, m, m);
  forms.b2 = acc.block(m, 0, m, m);
  forms.b3 = acc.block(2 * m, 0, m, m);
  forms.db1 = acc.block(3 * m, 0, m, m);
  forms.db2 = acc.block(4 * m, 0, m, m);
  forms.db3 = acc.block(5 * m, 0, m, m);

  // x-side of b3 collapses over offsets
  const VectorXd wacc = acc.block(slot_rows, 0, n, 1);
  forms.l2 = MatrixXd::Zero(m, m);
  forms.dl2 = MatrixXd::Zero(m, m);
  MatrixXd vtan = MatrixXd::Zero(n, m);
  for (int c = 0; c < dim; ++c) {
    forms.b3.noalias() += dx[static_cast<size_t>(c)].transpose() *
                          ((wacc.array() * inv_sx2.array()).matrix().asDiagonal() *
                           dx[static_cast<size_t>(c)]);
    forms.l2.noalias() += ex[static_cast<size_t>(c)].transpose() *
                          ((curve.speed() / n).asDiagonal() * ex[static_cast<size_t>(c)]);
    forms.dl2.noalias() += dx[static_cast<size_t>(c)].transpose() *
                           ((inv_sx / n).asDiagonal() * dx[static_cast<size_t>(c)]);
    vtan.noalias() += u_rows.col(c).asDiagonal() * dx[static_cast<size_t>(c)];
  }
  forms.d2len = forms.dl2;
  forms.d2len.noalias() -= vtan.transpose() * ((inv_sx / n).asDiagonal() * vtan);
  return forms;
}

MatrixXd second_variation_reduced(const ReducedForms& f, double p) {
  return 2.0 * f.b1 - p * f.b2 + f.b3 + 2.0 * f.db1 - p * f.db2 + f.db3;
}

MatrixXd metric_reduced(const ReducedForms& f) {
  return f.b1 + f.b2 + f.b3 + f.l2 + f.dl2;
}

} // namespace

std::uint64_t curve_hash(const Curve& curve) {
  std::uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < curve.grid_size(); ++i) {
    for (int c = 0; c < curve.ambient_dim(); ++c) {
      const double v = curve.nodes()(i, c);
      h = fnv1a(&v, sizeof v, h);
    }
  }
  return h;
}

Eigen::MatrixXd constrained_hessian(const Curve& curve, const SobolevOrder& order,
                                    const QuadratureGrid& grid, const TangentBasis& basis) {
  check_grid(order, grid);
  require_arclength(curve, "constrained_hessian");
  const ReducedForms forms = assemble_forms(curve, order, grid, basis.columns);
  const double lambda = lagrange_multiplier(curve, order, grid);
  return second_variation_reduced(forms, order.singular_power()) + lambda * forms.d2len;
}

Eigen::MatrixXd metric_g_reduced(const Curve& curve, const SobolevOrder& order,
                                 const QuadratureGrid& grid, const TangentBasis& basis) {
  check_grid(order, grid);
  const ReducedForms forms = assemble_forms(curve, order, grid, basis.columns);
  return metric_reduced(forms);
}

RemainderDecomposition compact_remainder(const Curve& curve, const SobolevOrder& order,
                                         const QuadratureGrid& grid,
                                         const TangentBasis& basis) {
  check_grid(order, grid);
  require_arclength(curve, "compact_remainder");
  const ReducedForms forms = assemble_forms(curve, order, grid, basis.columns);
  RemainderDecomposition out;
  out.reduced = second_variation_reduced(forms, order.singular_power()) - metric_reduced(forms);
  const MatrixXd sym = 0.5 * (out.reduced + out.reduced.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw LinearAlgebraError("eigendecomposition of the remainder failed");
  }
  VectorXd mags = eig.eigenvalues().cwiseAbs();
  std::sort(mags.data(), mags.data() + mags.size(), std::greater<double>());
  out.singular = mags;
  return out;
}

FormMatrix form_matrix(const Curve& curve, const SobolevOrder& order,
                       const QuadratureGrid& grid, const std::string& kind) {
  check_grid(order, grid);
  const int n = curve.grid_size();
  const int dim = curve.ambient_dim();
  const int total = n * dim;

  FormMatrix out;
  out.kind = kind;
  out.s = order.s;
  out.grid_size = n;
  out.ambient_dim = dim;
  out.curve_hash = curve_hash(curve);

  if (kind == "b1" || kind == "b2" || kind == "b3" || kind == "g") {
    const ReducedForms forms =
        assemble_forms(curve, order, grid, MatrixXd::Identity(total, total));
    if (kind == "b1") out.matrix = forms.b1;
    else if (kind == "b2") out.matrix = forms.b2;
    else if (kind == "b3") out.matrix = forms.b3;
    else out.matrix = metric_reduced(forms);
    return out;
  }
  if (kind == "hessian" || kind == "ktilde") {
    const TangentBasis basis = tangent_basis(curve, order.s);
    const ReducedForms forms = assemble_forms(curve, order, grid, basis.columns);
    MatrixXd reduced = second_variation_reduced(forms, order.singular_power());
    if (kind == "hessian") {
      const double lambda = lagrange_multiplier(curve, order, grid);
      reduced += lambda * forms.d2len;
    } else {
      reduced -= metric_reduced(forms);
    }
    // embed the tangent-space form back into nodal coordinates
    out.matrix = basis.columns * reduced * basis.columns.transpose();
    return out;
  }
  throw ConfigError("unknown form matrix kind '" + kind + "'");
}

void write_form_matrix_csv(const FormMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  char buf[64];
  for (int i = 0; i < m.matrix.rows(); ++i) {
    for (int j = 0; j < m.matrix.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.matrix(i, j));
      if (j) out << ",";
      out << buf;
    }
    out << "\n";
  }
  nlohmann::json side;
  side["kind"] = m.kind;
  side["s"] = m.s;
  side["grid_size"] = m.grid_size;
  side["ambient_dim"] = m.ambient_dim;
  char hexbuf[32];
  std::snprintf(hexbuf, sizeof hexbuf, "%016llx",
                static_cast<unsigned long long>(m.curve_hash));
  side["curve_hash"] = std::string(hexbuf);
  side["rows"] = m.matrix.rows();
  std::ofstream sidecar(path + ".json");
  if (!sidecar) throw ConfigError("cannot open " + path + ".json for writing");
  sidecar << side.dump(2) << "\n";
}

FormMatrix read_form_matrix_csv(const std::string& path) {
  std::ifstream side_in(path + ".json");
  if (!side_in) throw ConfigError("missing sidecar " + path + ".json");
  nlohmann::json side;
  try {
    side_in >> side;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad sidecar " + path + ".json: " + e.what());
  }

  FormMatrix out;
  try {
    out.kind = side.at("kind").get<std::string>();
    out.s = side.at("s").get<double>();
    out.grid_size = side.at("grid_size").get<int>();
    out.ambient_dim = side.at("ambient_dim").get<int>();
    out.curve_hash = std::stoull(side.at("curve_hash").get<std::string>(), nullptr, 16);
  } catch (const std::exception& e) {
    throw ConfigError("sidecar " + path + ".json missing fields: " + std::string(e.what()));
  }

  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const int r = static_cast<int>(rows.size());
  if (r == 0 || static_cast<int>(rows[0].size()) != r) {
    throw ConfigError(path + ": matrix is not square");
  }
  const int expected = side.at("rows").get<int>();
  if (r != expected) {
    throw ConfigError(path + ": row count disagrees with sidecar");
  }
  out.matrix.resize(r, r);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != r) {
      throw ConfigError(path + ": ragged row " + std::to_string(i));
    }
    for (int j = 0; j < r; ++j) out.matrix(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  return out;
}

} // namespace tpflow

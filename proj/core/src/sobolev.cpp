#include "tpflow/sobolev.hpp"

#include "tpflow/energy.hpp"
#include "tpflow/errors.hpp"
#include "tpflow/reduce.hpp"

#include <cmath>
#include <vector>

namespace tpflow {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_pair(const Field& h, const Field& k) {
  if (h.grid_size() != k.grid_size() || h.ambient_dim() != k.ambient_dim()) {
    throw ConfigError("field shapes do not match");
  }
}

// Graded rule for int_0^{1/2} |z|^e g(z) dz with e < -1 and g vanishing
// quadratically at 0: two-point weighted Gauss cells on dyadic levels,
// closed below the head by the quadratic model g(z) ~ g(b)(z/b)^2.
struct DifferenceRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

DifferenceRule difference_rule(double e, double head, int cells_per_level) {
  DifferenceRule r;
  double hi = 0.5;
  while (hi > head) {
    const double lo = std::max(hi * 0.5, head);
    const double step = (hi - lo) / cells_per_level;
    for (int c = cells_per_level - 1; c >= 0; --c) {
      const double a = lo + step * c;
      const double b = (c + 1 == cells_per_level) ? hi : lo + step * (c + 1);
      double n[2], w[2];
      detail::gauss_cell_weighted(a, b, e, n, w);
      r.nodes.push_back(n[0]);
      r.nodes.push_back(n[1]);
      r.weights.push_back(w[0]);
      r.weights.push_back(w[1]);
    }
    hi = lo;
  }
  // head closure: int_0^b z^e g ~ g(b) b^(e+1) / (e+3)
  r.nodes.push_back(head);
  r.weights.push_back(std::pow(head, e + 1.0) / (e + 3.0));
  return r;
}

} // namespace

SobolevOrder::SobolevOrder(double value) : s(value) {
  if (!(value > 1.5) || !(value < 2.0)) {
    throw ConfigError("sobolev order s = " + std::to_string(value) +
                      " outside the admissible interval (3/2, 2)");
  }
}

double hs_inner(const Field& h, const Field& k, double s) {
  check_pair(h, k);
  if (!(s > 0.0)) throw ConfigError("hs_inner needs a positive order");
  const int n = h.grid_size();
  const double s2 = 2.0 * s;
  double acc = 0.0;
  for (int c = 0; c < h.ambient_dim(); ++c) {
    const VectorXcd& a = h.coeffs[static_cast<size_t>(c)];
    const VectorXcd& b = k.coeffs[static_cast<size_t>(c)];
    for (int j = 0; j < n; ++j) {
      const int freq = fourier::bin_frequency(j, n);
      const double mult = 1.0 + std::pow(kTwoPi * std::abs(freq), s2);
      acc += mult * (a[j] * std::conj(b[j])).real();
    }
  }
  return acc;
}

double hs_norm_sq(const Field& h, double s) { return hs_inner(h, h, s); }

double gagliardo_seminorm_sq(const Field& k, double sigma) {
  if (!(sigma > 0.0) || !(sigma < 1.0)) {
    throw ConfigError("gagliardo order sigma must lie in (0, 1)");
  }
  const int n = k.grid_size();
  const DifferenceRule rule = difference_rule(-2.0 * sigma - 1.0, 1e-8, 16);
  const int m = static_cast<int>(rule.nodes.size());

  // both signs of the offset
  std::vector<double> cell(static_cast<size_t>(2 * m), 0.0);
  reduce::parallel_for(2 * m, [&](int idx) {
    const int c = idx % m;
    const double z = (idx < m) ? rule.nodes[static_cast<size_t>(c)]
                               : -rule.nodes[static_cast<size_t>(c)];
    double acc = 0.0;
    for (int d = 0; d < k.ambient_dim(); ++d) {
      const VectorXd shifted = fourier::shifted_values(k.coeffs[static_cast<size_t>(d)], z);
      acc += (shifted - k.values.col(d)).squaredNorm();
    }
    cell[static_cast<size_t>(idx)] = rule.weights[static_cast<size_t>(c)] * acc / n;
  });
  return reduce::pairwise_sum(cell);
}

PhiValues phi_operator(const Field& k, const SobolevOrder& order, const QuadratureGrid& grid) {
  const int n = k.grid_size();
  const int dim = k.ambient_dim();
  const int nw = grid.size();
  const double s = order.s;

  PhiValues out;
  out.offsets = grid.offsets();
  out.weights = grid.weight_plain();
  out.component.assign(static_cast<size_t>(dim), MatrixXd(n, nw));

  // per-component periodic antiderivative; the integral of k over
  // (x, x+w) is A(x+w) - A(x) + mean * w
  std::vector<VectorXcd> anti(static_cast<size_t>(dim));
  std::vector<VectorXd> anti_grid(static_cast<size_t>(dim));
  VectorXd mean(dim);
  for (int d = 0; d < dim; ++d) {
    anti[static_cast<size_t>(d)] =
        fourier::antiderivative_coeffs(k.coeffs[static_cast<size_t>(d)]);
    anti_grid[static_cast<size_t>(d)] = fourier::values(anti[static_cast<size_t>(d)]);
    mean[d] = k.coeffs[static_cast<size_t>(d)][0].real();
  }

  reduce::parallel_for(nw, [&](int j) {
    const double w = grid.offsets()[j];
    const double scale = std::pow(std::abs(w), -s - 0.5);
    for (int d = 0; d < dim; ++d) {
      const VectorXd shifted = fourier::shifted_values(anti[static_cast<size_t>(d)], w);
      for (int i = 0; i < n; ++i) {
        const double integral = shifted[i] - anti_grid[static_cast<size_t>(d)][i] + mean[d] * w;
        out.component[static_cast<size_t>(d)](i, j) = scale * (w * k.values(i, d) - integral);
      }
    }
  });
  return out;
}

double phi_norm_sq(const PhiValues& phi, int grid_size) {
  const int nw = static_cast<int>(phi.offsets.size());
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(nw));
  for (int j = 0; j < nw; ++j) {
    double acc = 0.0;
    for (const auto& comp : phi.component) acc += comp.col(j).squaredNorm();
    terms.push_back(phi.weights[j] * acc / grid_size);
  }
  return reduce::pairwise_sum(terms);
}

Field riesz_solve(const Field& density, double s) {
  if (!(s > 0.0)) throw ConfigError("riesz_solve needs a positive order");
  const int n = density.grid_size();
  const double s2 = 2.0 * s;
  MatrixXd out(n, density.ambient_dim());
  for (int c = 0; c < density.ambient_dim(); ++c) {
    VectorXcd coeffs = density.coeffs[static_cast<size_t>(c)];
    for (int j = 0; j < n; ++j) {
      const int freq = fourier::bin_frequency(j, n);
      const double mult = 1.0 + std::pow(kTwoPi * std::abs(freq), s2);
      coeffs[j] /= mult;
    }
    out.col(c) = fourier::values(coeffs);
  }
  return Field(std::move(out));
}

} // namespace tpflow

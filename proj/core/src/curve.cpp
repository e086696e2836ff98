#include "tpflow/curve.hpp"

#include "tpflow/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace tpflow {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_shape(const MatrixXd& m, const char* what) {
  if (m.rows() < 8) {
    throw ConfigError(std::string(what) + ": need at least 8 grid nodes, got " +
                      std::to_string(m.rows()));
  }
  if (m.cols() < 2) {
    throw ConfigError(std::string(what) + ": ambient dimension must be >= 2, got " +
                      std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw ConfigError(std::string(what) + ": non-finite entries");
}

double segment_distance(const VectorXd& a0, const VectorXd& a1, const VectorXd& b0,
                        const VectorXd& b1) {
  // closest points of two segments, clamped coordinates
  const VectorXd d1 = a1 - a0;
  const VectorXd d2 = b1 - b0;
  const VectorXd r = a0 - b0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0, t = 0.0;
  const double tiny = 1e-30;
  if (a <= tiny && e <= tiny) {
    return r.norm();
  }
  if (a <= tiny) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= tiny) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      if (denom > tiny) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return (a0 + s * d1 - b0 - t * d2).norm();
}

} // namespace

Field::Field(MatrixXd vals) : values(std::move(vals)) {
  check_shape(values, "field");
  const int dim = ambient_dim();
  coeffs.resize(static_cast<size_t>(dim));
  deriv_coeffs.resize(static_cast<size_t>(dim));
  deriv.resize(grid_size(), dim);
  for (int c = 0; c < dim; ++c) {
    coeffs[static_cast<size_t>(c)] = fourier::coeffs(values.col(c));
    deriv_coeffs[static_cast<size_t>(c)] =
        fourier::derivative_coeffs(coeffs[static_cast<size_t>(c)]);
    deriv.col(c) = fourier::values(deriv_coeffs[static_cast<size_t>(c)]);
  }
}

Curve::Curve(MatrixXd nodes) : nodes_(std::move(nodes)) {
  check_shape(nodes_, "curve");
  const int n = grid_size();
  const int dim = ambient_dim();

  coeffs_.resize(static_cast<size_t>(dim));
  deriv_coeffs_.resize(static_cast<size_t>(dim));
  deriv_.resize(n, dim);
  for (int c = 0; c < dim; ++c) {
    coeffs_[static_cast<size_t>(c)] = fourier::coeffs(nodes_.col(c));
    deriv_coeffs_[static_cast<size_t>(c)] =
        fourier::derivative_coeffs(coeffs_[static_cast<size_t>(c)]);
    deriv_.col(c) = fourier::values(deriv_coeffs_[static_cast<size_t>(c)]);
  }
  speed_ = deriv_.rowwise().norm();

  const double scale = speed_.mean();
  if (speed_.minCoeff() <= 1e-10 * scale) {
    throw ConfigError("curve is not regular: interpolant speed vanishes at a node");
  }
  // discrete injectivity: distinct nodes away from the diagonal
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue; // cyclic neighbors
      if ((nodes_.row(i) - nodes_.row(j)).norm() == 0.0) {
        throw SelfIntersectionError(
            "coincident nodes " + std::to_string(i) + " and " + std::to_string(j), i,
            static_cast<double>(j - i) / n);
      }
    }
  }
}

double Curve::polyline_length() const {
  const int n = grid_size();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += (nodes_.row((i + 1) % n) - nodes_.row(i)).norm();
  }
  return acc;
}

VectorXd Curve::point_at(double x) const {
  VectorXd p(ambient_dim());
  for (int c = 0; c < ambient_dim(); ++c) {
    p[c] = fourier::evaluate(coeffs_[static_cast<size_t>(c)], x);
  }
  return p;
}

VectorXd Curve::derivative_at(double x) const {
  VectorXd p(ambient_dim());
  for (int c = 0; c < ambient_dim(); ++c) {
    p[c] = fourier::evaluate_derivative(coeffs_[static_cast<size_t>(c)], x);
  }
  return p;
}

MatrixXd arc_derivative(const Curve& curve, const Field& h) {
  if (h.grid_size() != curve.grid_size() || h.ambient_dim() != curve.ambient_dim()) {
    throw ConfigError("field shape does not match curve");
  }
  return h.deriv.array().colwise() / curve.speed().array();
}

VectorXd chord_defect(const Curve& curve, const Field& h, int i, int j) {
  const int n = curve.grid_size();
  if (i < 0 || i >= n || j < 0 || j >= n) throw ConfigError("node index out of range");
  const VectorXd dg = (curve.nodes().row(j) - curve.nodes().row(i)).transpose();
  const VectorXd dh = (h.values.row(j) - h.values.row(i)).transpose();
  const VectorXd u = curve.deriv().row(i).transpose() / curve.speed()[i];
  const VectorXd dhi = h.deriv.row(i).transpose() / curve.speed()[i];
  return dh - dhi * u.dot(dg);
}

double tangent_point_radius(const VectorXd& dgamma, const VectorXd& tangent) {
  const double tn = tangent.norm();
  if (tn == 0.0) throw ConfigError("tangent_point_radius needs a nonzero tangent");
  const VectorXd u = tangent / tn;
  const VectorXd normal_part = dgamma - u * u.dot(dgamma);
  const double d2 = dgamma.squaredNorm();
  const double np = normal_part.norm();
  if (np <= 1e-14 * std::max(d2, 1.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return d2 / (2.0 * np);
}

double tangent_point_radius(const Curve& curve, int i, int j) {
  const int n = curve.grid_size();
  if (i < 0 || i >= n || j < 0 || j >= n) throw ConfigError("node index out of range");
  if (i == j) throw ConfigError("tangent_point_radius needs distinct nodes");
  const VectorXd dg = (curve.nodes().row(j) - curve.nodes().row(i)).transpose();
  return tangent_point_radius(dg, curve.deriv().row(i).transpose());
}

double distortion(const Curve& curve) {
  const int n = curve.grid_size();
  std::vector<double> arc(static_cast<size_t>(n + 1), 0.0);
  for (int i = 0; i < n; ++i) {
    arc[static_cast<size_t>(i + 1)] =
        arc[static_cast<size_t>(i)] +
        (curve.nodes().row((i + 1) % n) - curve.nodes().row(i)).norm();
  }
  const double total = arc[static_cast<size_t>(n)];
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const double along = arc[static_cast<size_t>(j)] - arc[static_cast<size_t>(i)];
      const double intrinsic = std::min(along, total - along);
      const double chord = (curve.nodes().row(j) - curve.nodes().row(i)).norm();
      worst = std::max(worst, intrinsic / chord);
    }
  }
  return worst;
}

double min_separation(const Curve& curve) {
  const int n = curve.grid_size();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const VectorXd a0 = curve.nodes().row(i).transpose();
    const VectorXd a1 = curve.nodes().row((i + 1) % n).transpose();
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const VectorXd b0 = curve.nodes().row(j).transpose();
      const VectorXd b1 = curve.nodes().row((j + 1) % n).transpose();
      best = std::min(best, segment_distance(a0, a1, b0, b1));
    }
  }
  return best;
}

Curve retract_to_arclength(const Curve& curve) {
  const int n = curve.grid_size();
  const int dim = curve.ambient_dim();
  MatrixXd nodes = curve.nodes();

  for (int pass = 0; pass < 6; ++pass) {
    std::vector<VectorXcd> comp(static_cast<size_t>(dim));
    MatrixXd deriv(n, dim);
    for (int c = 0; c < dim; ++c) {
      comp[static_cast<size_t>(c)] = fourier::coeffs(nodes.col(c));
      deriv.col(c) =
          fourier::values(fourier::derivative_coeffs(comp[static_cast<size_t>(c)]));
    }
    const VectorXd speed = deriv.rowwise().norm();
    const double len = speed.mean();
    if (speed.minCoeff() <= 1e-10 * len) {
      throw ConfigError("retraction failed: speed vanishes during reparametrization");
    }
    const double flat = (speed.array() / len - 1.0).abs().maxCoeff();
    if (flat < 1e-13) break;

    // cumulative arc length ell(x) = len*x + periodic part, inverted at
    // the uniform targets by Newton with bisection fallback
    const VectorXcd speed_coeffs = fourier::coeffs(speed);
    const VectorXcd anti = fourier::antiderivative_coeffs(speed_coeffs);
    auto ell = [&](double x) { return len * x + fourier::evaluate(anti, x); };
    auto dell = [&](double x) { return fourier::evaluate(speed_coeffs, x); };

    MatrixXd resampled(n, dim);
    for (int i = 0; i < n; ++i) {
      const double target = len * static_cast<double>(i) / n;
      double x = static_cast<double>(i) / n;
      double lo = x - 0.5, hi = x + 0.5;
      for (int it = 0; it < 60; ++it) {
        const double g = ell(x) - target;
        if (std::abs(g) < 1e-15 * len) break;
        if (g > 0) hi = std::min(hi, x);
        else lo = std::max(lo, x);
        const double d = dell(x);
        double step = g / d;
        double next = x - step;
        if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-16) break;
        x = next;
      }
      for (int c = 0; c < dim; ++c) {
        resampled(i, c) = fourier::evaluate(comp[static_cast<size_t>(c)], x);
      }
    }
    nodes = resampled;
  }

  // normalize length and base point
  MatrixXd deriv(n, dim);
  for (int c = 0; c < dim; ++c) deriv.col(c) = fourier::derivative(nodes.col(c));
  const double len = deriv.rowwise().norm().mean();
  nodes /= len;
  const VectorXd base = nodes.row(0);
  nodes.rowwise() -= base.transpose();
  return Curve(nodes);
}

Curve make_circle(int grid_size, int ambient_dim) {
  if (ambient_dim < 2) throw ConfigError("circle needs ambient dimension >= 2");
  const double r = 1.0 / kTwoPi;
  MatrixXd nodes = MatrixXd::Zero(grid_size, ambient_dim);
  for (int i = 0; i < grid_size; ++i) {
    const double a = kTwoPi * i / grid_size;
    nodes(i, 0) = r * (std::cos(a) - 1.0);
    nodes(i, 1) = r * std::sin(a);
  }
  return Curve(nodes);
}

Curve make_ellipse(int grid_size, double axis_ratio) {
  if (axis_ratio <= 0.0) throw ConfigError("ellipse axis ratio must be positive");
  MatrixXd nodes(grid_size, 2);
  for (int i = 0; i < grid_size; ++i) {
    const double a = kTwoPi * i / grid_size;
    nodes(i, 0) = axis_ratio * (std::cos(a) - 1.0);
    nodes(i, 1) = std::sin(a);
  }
  Curve raw(nodes);
  const double len = raw.length();
  return Curve(raw.nodes() / len);
}

Curve make_torus_knot(int grid_size, int wraps, int windings, double tube_ratio) {
  if (wraps < 1 || windings < 1) throw ConfigError("torus knot winding numbers must be >= 1");
  if (!(tube_ratio > 0.0 && tube_ratio < 1.0)) {
    throw ConfigError("torus knot tube ratio must lie in (0, 1)");
  }
  MatrixXd nodes(grid_size, 3);
  for (int i = 0; i < grid_size; ++i) {
    const double a = kTwoPi * i / grid_size;
    const double ring = 1.0 + tube_ratio * std::cos(windings * a);
    nodes(i, 0) = ring * std::cos(wraps * a);
    nodes(i, 1) = ring * std::sin(wraps * a);
    nodes(i, 2) = tube_ratio * std::sin(windings * a);
  }
  Curve raw(nodes);
  MatrixXd scaled = raw.nodes() / raw.length();
  const VectorXd base = scaled.row(0);
  scaled.rowwise() -= base.transpose();
  return Curve(scaled);
}

Curve make_perturbed_circle(int grid_size, int mode_lo, int mode_hi, double amplitude,
                            unsigned long long seed) {
  if (mode_lo < 1 || mode_hi < mode_lo) throw ConfigError("bad perturbation mode range");
  if (2 * mode_hi >= grid_size) throw ConfigError("perturbation modes exceed grid resolution");
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() {
    // uniform in [-1, 1), stable across standard library implementations
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  };
  const int n_modes = mode_hi - mode_lo + 1;
  VectorXd ca(n_modes), sa(n_modes);
  double norm = 0.0;
  for (int m = 0; m < n_modes; ++m) {
    ca[m] = unit();
    sa[m] = unit();
    norm += std::abs(ca[m]) + std::abs(sa[m]);
  }
  if (norm == 0.0) norm = 1.0;

  const double r = 1.0 / kTwoPi;
  MatrixXd nodes(grid_size, 2);
  for (int i = 0; i < grid_size; ++i) {
    const double x = static_cast<double>(i) / grid_size;
    double bump = 0.0;
    for (int m = 0; m < n_modes; ++m) {
      const int k = mode_lo + m;
      bump += ca[m] * std::cos(kTwoPi * k * x) + sa[m] * std::sin(kTwoPi * k * x);
    }
    const double rad = r * (1.0 + amplitude * bump / norm);
    const double a = kTwoPi * x;
    nodes(i, 0) = rad * std::cos(a);
    nodes(i, 1) = rad * std::sin(a);
  }
  const VectorXd base = nodes.row(0);
  nodes.rowwise() -= base.transpose();
  return Curve(nodes);
}

Field make_random_field(int grid_size, int ambient_dim, int max_mode,
                        unsigned long long seed) {
  if (grid_size < 8) throw ConfigError("grid too small for a random field");
  if (ambient_dim < 2) throw ConfigError("field needs at least two components");
  if (max_mode < 1 || 2 * max_mode >= grid_size) {
    throw ConfigError("random field mode cap out of range");
  }
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() {
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  };
  MatrixXd values = MatrixXd::Zero(grid_size, ambient_dim);
  for (int c = 0; c < ambient_dim; ++c) {
    values.col(c).array() += 0.5 * unit();
    for (int m = 1; m <= max_mode; ++m) {
      const double damp = 1.0 / (m * m);
      const double a = damp * unit();
      const double b = damp * unit();
      for (int i = 0; i < grid_size; ++i) {
        const double ang = kTwoPi * m * i / grid_size;
        values(i, c) += a * std::cos(ang) + b * std::sin(ang);
      }
    }
  }
  return Field(values);
}

void write_curve_csv(const Curve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "x";
  for (int c = 0; c < curve.ambient_dim(); ++c) out << ",g" << (c + 1);
  out << "\n";
  char buf[64];
  for (int i = 0; i < curve.grid_size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(i) / curve.grid_size());
    out << buf;
    for (int c = 0; c < curve.ambient_dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", curve.nodes()(i, c));
      out << "," << buf;
    }
    out << "\n";
  }
}

Curve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  // header row defines the column count
  int cols = 1;
  for (char ch : line) {
    if (ch == ',') ++cols;
  }
  if (cols < 3) throw ConfigError(path + ": need x plus at least two coordinate columns");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(row.size()) != cols) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(cols) + " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  if (n < 8) throw ConfigError(path + ": need at least 8 node rows");
  MatrixXd nodes(n, cols - 1);
  for (int i = 0; i < n; ++i) {
    for (int c = 1; c < cols; ++c) nodes(i, c - 1) = rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
  }
  return Curve(nodes);
}

} // namespace tpflow

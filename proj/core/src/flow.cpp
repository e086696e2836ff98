#include "tpflow/flow.hpp"

#include "tpflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace tpflow {

void FlowConfig::validate() const {
  if (!(dt_min > 0.0) || !(dt_init >= dt_min) || !(dt_max >= dt_init)) {
    throw ConfigError("flow steps must satisfy 0 < dt_min <= dt_init <= dt_max");
  }
  if (!(grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("armijo_c must lie in (0, 1)");
  if (!(dt_grow > 1.0)) throw ConfigError("dt_grow must exceed 1");
  if (!(dt_shrink > 0.0 && dt_shrink < 1.0)) throw ConfigError("dt_shrink must lie in (0, 1)");
  if (trace_stride < 1) throw ConfigError("trace_stride must be at least 1");
}

namespace {

TraceRow state_row(double t, double energy, double grad_norm, const Curve& curve) {
  TraceRow row;
  row.t = t;
  row.energy = energy;
  row.grad_norm = grad_norm;
  row.distortion = distortion(curve);
  row.min_separation = min_separation(curve);
  row.length_residual = std::abs(curve.length() - 1.0);
  return row;
}

} // namespace

FlowResult run_flow(const Curve& start, const SobolevOrder& order, const QuadratureGrid& grid,
                    const FlowConfig& config,
                    const std::function<void(int, const Curve&)>& observer) {
  config.validate();
  Curve curve = retract_to_arclength(start);
  double t = 0.0;
  double dt = config.dt_init;

  FlowResult result{curve, {}, 0, false, 0.0, 0.0};
  if (observer) observer(0, curve);

  int step = 0;
  while (true) {
    const double energy = tp_energy(curve, order, grid);
    const GradientResult grad = constrained_gradient(curve, order, grid);
    TraceRow row = state_row(t, energy, grad.norm_hs, curve);

    if (grad.norm_hs <= config.grad_tol || step >= config.max_steps) {
      result.trace.push_back(row);
      result.converged = grad.norm_hs <= config.grad_tol;
      result.final_energy = energy;
      result.final_grad_norm = grad.norm_hs;
      break;
    }

    bool accepted = false;
    Curve next = curve;
    std::string reject_reason;
    while (!accepted) {
      try {
        Curve trial = retract_to_arclength(Curve(curve.nodes() - dt * grad.gradient.values));
        const double e_trial = tp_energy(trial, order, grid);
        if (e_trial <= energy - config.armijo_c * dt * grad.norm_hs * grad.norm_hs) {
          next = std::move(trial);
          accepted = true;
        } else {
          reject_reason = "insufficient decrease";
        }
      } catch (const SelfIntersectionError& e) {
        // the trial stepped over itself; retreat and try a shorter step
        reject_reason = e.what();
      } catch (const ConfigError& e) {
        reject_reason = e.what();
      }
      if (!accepted) {
        dt *= config.dt_shrink;
        if (dt < config.dt_min) {
          throw StagnationError("line search collapsed below dt_min at step " +
                                std::to_string(step) + "; last rejection: " + reject_reason);
        }
      }
    }

    row.dt = dt;
    if (step % config.trace_stride == 0) result.trace.push_back(row);
    if (observer) observer(step + 1, next);
    curve = std::move(next);
    t += dt;
    dt = std::min(dt * config.dt_grow, config.dt_max);
    ++step;
  }

  result.curve = curve;
  result.steps = step;
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "t,energy,grad_norm,distortion,min_separation,dt,length_residual\n";
  char buf[64];
  for (const TraceRow& r : trace) {
    const double cols[7] = {r.t, r.energy, r.grad_norm, r.distortion,
                            r.min_separation, r.dt, r.length_residual};
    for (int j = 0; j < 7; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", cols[j]);
      if (j) out << ",";
      out << buf;
    }
    out << "\n";
  }
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "t,energy,grad_norm,distortion,min_separation,dt,length_residual") {
    throw ConfigError(path + ": unexpected trace header");
  }
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    double cols[7];
    for (int j = 0; j < 7; ++j) {
      if (!std::getline(ss, cell, ',')) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 7 columns");
      }
      try {
        cols[j] = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (std::getline(ss, cell, ',')) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 7 columns");
    }
    rows.push_back({cols[0], cols[1], cols[2], cols[3], cols[4], cols[5], cols[6]});
  }
  return rows;
}

LojasiewiczFit ls_fit(const std::vector<TraceRow>& trace, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw ConfigError("tail_fraction must lie in (0, 1]");
  }
  const int n = static_cast<int>(trace.size());
  if (n < 3) throw ConfigError("trace too short for a decay fit");
  const double e_last = trace[static_cast<size_t>(n - 1)].energy;
  const double e_prev = trace[static_cast<size_t>(n - 2)].energy;
  if (e_prev < e_last) throw ConfigError("trace energy increases at the tail");

  LojasiewiczFit fit;
  fit.e_infinity = e_last - 0.5 * (e_prev - e_last);
  const double gap_last = e_last - fit.e_infinity;
  // the limit estimate is uncertain at the scale of the last gap; keep
  // rows well above it and above the floating point noise floor
  const double threshold =
      std::max({1e-13 * std::abs(e_last), 100.0 * gap_last, 1e-300});

  int start = n - static_cast<int>(tail_fraction * n);
  start = std::max(0, std::min(start, n - 1));
  std::vector<double> xs, ys;
  for (int i = start; i < n; ++i) {
    const double gap = trace[static_cast<size_t>(i)].energy - fit.e_infinity;
    const double g = trace[static_cast<size_t>(i)].grad_norm;
    if (gap > threshold && g > 0.0) {
      xs.push_back(std::log(gap));
      ys.push_back(std::log(g));
    }
  }
  fit.rows_used = static_cast<int>(xs.size());
  if (fit.rows_used < 50) {
    throw ConfigError("only " + std::to_string(fit.rows_used) +
                      " trace rows qualify for the decay fit; need 50");
  }

  const int m = fit.rows_used;
  double sx = 0.0, sy = 0.0;
  for (int i = 0; i < m; ++i) {
    sx += xs[static_cast<size_t>(i)];
    sy += ys[static_cast<size_t>(i)];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < m; ++i) {
    const double dx = xs[static_cast<size_t>(i)] - mx;
    const double dy = ys[static_cast<size_t>(i)] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw ConfigError("degenerate trace for the decay fit");
  fit.theta = sxy / sxx;
  fit.log_z = my - fit.theta * mx;
  fit.r_squared = (sxy * sxy) / (sxx * syy);
  if (!(fit.theta > 0.0 && fit.theta < 1.05)) {
    throw ConfigError("fitted decay exponent " + std::to_string(fit.theta) +
                      " outside the admissible range (0, 1.05)");
  }
  return fit;
}

double rate_envelope(double theta, double z, double e0, double t) {
  if (!(theta >= 0.5 && theta < 1.0)) {
    throw ConfigError("rate envelope needs theta in [1/2, 1)");
  }
  if (!(z > 0.0)) throw ConfigError("rate envelope needs z > 0");
  if (!(e0 >= 0.0)) throw ConfigError("rate envelope needs a nonnegative initial gap");
  if (!(t >= 0.0)) throw ConfigError("rate envelope needs t >= 0");
  if (e0 == 0.0) return 0.0;
  if (std::abs(theta - 0.5) < 1e-12) {
    return (2.0 / z) * std::sqrt(e0) * std::exp(-0.5 * z * z * t);
  }
  const double a = 2.0 * theta - 1.0;
  const double base = z * z * a * t + std::pow(e0, -a);
  return std::pow(base, -(1.0 - theta) / a) / (z * (1.0 - theta));
}

void write_curve_svg(const Curve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  const int n = curve.grid_size();
  double xmin = curve.nodes().col(0).minCoeff(), xmax = curve.nodes().col(0).maxCoeff();
  double ymin = curve.nodes().col(1).minCoeff(), ymax = curve.nodes().col(1).maxCoeff();
  const double extent = std::max({xmax - xmin, ymax - ymin, 1e-6});
  const double pad = 0.05 * extent;
  xmin -= pad;
  ymin -= pad;
  const double w = (xmax + pad) - xmin;
  const double h = (ymax + pad) - ymin;

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
                "viewBox=\"%.6g %.6g %.6g %.6g\">\n",
                xmin, -(ymin + h), w, h);
  out << buf;
  out << "<polygon fill=\"none\" stroke=\"black\" stroke-width=\"" << extent / 200.0
      << "\" points=\"";
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g", curve.nodes()(i, 0), -curve.nodes()(i, 1));
    if (i) out << " ";
    out << buf;
  }
  out << "\"/>\n</svg>\n";
}

} // namespace tpflow

#include "tpflow/experiment.hpp"

#include "tpflow/errors.hpp"
#include "tpflow/sobolev.hpp"
#include "tpflow/variation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

namespace tpflow {

double circle_energy_reference(double p) {
  if (!(p > 4.0 && p < 5.0)) throw ConfigError("energy exponent must lie in (4, 5)");
  // integrand sin(pi w)^{4-p} on (0, 1/2); the w^{4-p} endpoint
  // singularity is absorbed by the double exponential substitution
  const double r = 0.25;
  const double c = 0.25;
  auto node = [&](double t) -> double {
    const double sh = M_PI_2 * std::sinh(t);
    if (std::abs(sh) > 350.0) return 0.0;
    const double ch = std::cosh(sh);
    const double weight = M_PI_2 * std::cosh(t) / (ch * ch);
    double w;
    if (t < 0.0) {
      // distance to the singular endpoint without cancellation
      w = 2.0 * r / (1.0 + std::exp(-2.0 * sh));
      if (w <= 0.0) return 0.0;
    } else {
      w = c + r * std::tanh(sh);
    }
    return r * weight * std::pow(std::sin(M_PI * w), 4.0 - p);
  };

  double h = 0.5;
  double integral = h * node(0.0);
  for (int k = 1; k <= 200; ++k) {
    const double term = node(k * h) + node(-k * h);
    integral += h * term;
    if (k > 8 && std::abs(term) < 1e-18 * std::abs(integral)) break;
  }
  for (int level = 0; level < 10; ++level) {
    h *= 0.5;
    double odd = 0.0;
    const int cap = 400 << level;
    for (int k = 1; k <= cap; k += 2) {
      const double term = node(k * h) + node(-k * h);
      odd += term;
      if (k > 16 && std::abs(term) < 1e-18 * std::abs(odd)) break;
    }
    const double refined = 0.5 * integral + h * odd;
    const bool settled = std::abs(refined - integral) < 1e-14 * std::abs(refined);
    integral = refined;
    if (settled && level > 2) break;
  }
  return 2.0 * std::pow(M_PI, p - 2.0) * integral;
}

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (!key.empty() && key[0] == '_') continue;
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_into(const json& j, const char* key, T& slot, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    slot = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

FlowConfig flow_from_json(const json& j) {
  check_keys(j,
             {"dt_init", "dt_min", "dt_max", "grad_tol", "max_steps", "armijo_c", "dt_grow",
              "dt_shrink", "trace_stride"},
             "flow");
  FlowConfig f;
  read_into(j, "dt_init", f.dt_init, "flow");
  read_into(j, "dt_min", f.dt_min, "flow");
  read_into(j, "dt_max", f.dt_max, "flow");
  read_into(j, "grad_tol", f.grad_tol, "flow");
  read_into(j, "max_steps", f.max_steps, "flow");
  read_into(j, "armijo_c", f.armijo_c, "flow");
  read_into(j, "dt_grow", f.dt_grow, "flow");
  read_into(j, "dt_shrink", f.dt_shrink, "flow");
  read_into(j, "trace_stride", f.trace_stride, "flow");
  return f;
}

InitialCurve initial_from_json(const json& j) {
  check_keys(j,
             {"kind", "mode_lo", "mode_hi", "amplitude", "seed", "axis_ratio", "wraps",
              "windings", "tube_ratio", "csv_path"},
             "initial");
  InitialCurve c;
  read_into(j, "kind", c.kind, "initial");
  read_into(j, "mode_lo", c.mode_lo, "initial");
  read_into(j, "mode_hi", c.mode_hi, "initial");
  read_into(j, "amplitude", c.amplitude, "initial");
  read_into(j, "seed", c.seed, "initial");
  read_into(j, "axis_ratio", c.axis_ratio, "initial");
  read_into(j, "wraps", c.wraps, "initial");
  read_into(j, "windings", c.windings, "initial");
  read_into(j, "tube_ratio", c.tube_ratio, "initial");
  read_into(j, "csv_path", c.csv_path, "initial");
  return c;
}

RunParams params_from_json(const json& j) {
  check_keys(j,
             {"s", "grid_size", "initial", "flow", "tail_fraction", "snapshot_stride",
              "render", "output_dir"},
             "config");
  RunParams p;
  read_into(j, "s", p.s, "config");
  read_into(j, "grid_size", p.grid_size, "config");
  if (j.contains("initial")) p.initial = initial_from_json(j.at("initial"));
  if (j.contains("flow")) p.flow = flow_from_json(j.at("flow"));
  read_into(j, "tail_fraction", p.tail_fraction, "config");
  read_into(j, "snapshot_stride", p.snapshot_stride, "config");
  read_into(j, "render", p.render, "config");
  read_into(j, "output_dir", p.output_dir, "config");
  read_into(j, "_corrupt_quadrature", p.corrupt_quadrature, "config");
  validate_params(p);
  return p;
}

json initial_to_json(const InitialCurve& c) {
  json j;
  j["kind"] = c.kind;
  if (c.kind == "perturbed_circle") {
    j["mode_lo"] = c.mode_lo;
    j["mode_hi"] = c.mode_hi;
    j["amplitude"] = c.amplitude;
    j["seed"] = c.seed;
  } else if (c.kind == "ellipse") {
    j["axis_ratio"] = c.axis_ratio;
  } else if (c.kind == "torus_knot") {
    j["wraps"] = c.wraps;
    j["windings"] = c.windings;
    j["tube_ratio"] = c.tube_ratio;
  } else if (c.kind == "csv") {
    j["csv_path"] = c.csv_path;
  }
  return j;
}

json flow_to_json(const FlowConfig& f) {
  json j;
  j["dt_init"] = f.dt_init;
  j["dt_min"] = f.dt_min;
  j["dt_max"] = f.dt_max;
  j["grad_tol"] = f.grad_tol;
  j["max_steps"] = f.max_steps;
  j["armijo_c"] = f.armijo_c;
  j["dt_grow"] = f.dt_grow;
  j["dt_shrink"] = f.dt_shrink;
  j["trace_stride"] = f.trace_stride;
  return j;
}

json params_to_json(const RunParams& p) {
  json j;
  j["s"] = p.s;
  j["grid_size"] = p.grid_size;
  j["initial"] = initial_to_json(p.initial);
  j["flow"] = flow_to_json(p.flow);
  j["tail_fraction"] = p.tail_fraction;
  j["snapshot_stride"] = p.snapshot_stride;
  j["render"] = p.render;
  j["output_dir"] = p.output_dir;
  if (p.corrupt_quadrature) j["_corrupt_quadrature"] = true;
  return j;
}

QuadratureGrid grid_for(const RunParams& p, const SobolevOrder& order) {
  QuadratureGrid grid = QuadratureGrid::for_energy(order, p.grid_size);
  if (p.corrupt_quadrature) {
    int idx = 0;
    grid.weight_singular().maxCoeff(&idx);
    grid = grid.scaled_weight(idx, 1.01);
  }
  return grid;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

} // namespace

RunParams default_params() { return RunParams{}; }

RunParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return params_from_json(j);
}

void validate_params(const RunParams& p) {
  SobolevOrder order(p.s); // rejects s outside (3/2, 2)
  (void)order;
  const int n = p.grid_size;
  if (n < 32 || n > 1024 || (n & (n - 1)) != 0) {
    throw ConfigError("grid_size must be a power of two between 32 and 1024");
  }
  if (!(p.tail_fraction > 0.0 && p.tail_fraction <= 1.0)) {
    throw ConfigError("tail_fraction must lie in (0, 1]");
  }
  if (p.snapshot_stride < 0) throw ConfigError("snapshot_stride must be nonnegative");
  p.flow.validate();

  const InitialCurve& c = p.initial;
  if (c.kind == "circle") {
  } else if (c.kind == "perturbed_circle") {
    if (c.mode_lo < 1 || c.mode_hi < c.mode_lo) {
      throw ConfigError("perturbation modes must satisfy 1 <= mode_lo <= mode_hi");
    }
    if (2 * c.mode_hi >= n) throw ConfigError("perturbation modes exceed grid resolution");
    if (!(c.amplitude >= 0.0 && c.amplitude <= 0.3)) {
      throw ConfigError("perturbation amplitude must lie in [0, 0.3]");
    }
  } else if (c.kind == "ellipse") {
    if (!(c.axis_ratio >= 1.0 && c.axis_ratio < 50.0)) {
      throw ConfigError("axis_ratio must lie in [1, 50)");
    }
  } else if (c.kind == "torus_knot") {
    if (c.wraps < 2 || c.windings < 2) throw ConfigError("torus knot needs wraps, windings >= 2");
    if (!(c.tube_ratio > 0.0 && c.tube_ratio < 1.0)) {
      throw ConfigError("tube_ratio must lie in (0, 1)");
    }
  } else if (c.kind == "csv") {
    if (c.csv_path.empty()) throw ConfigError("csv initial curve needs csv_path");
  } else {
    throw ConfigError("unknown initial curve kind '" + c.kind + "'");
  }
}

Curve build_initial(const InitialCurve& init, int grid_size) {
  if (init.kind == "circle") return make_circle(grid_size);
  if (init.kind == "perturbed_circle") {
    return make_perturbed_circle(grid_size, init.mode_lo, init.mode_hi, init.amplitude,
                                 init.seed);
  }
  if (init.kind == "ellipse") return make_ellipse(grid_size, init.axis_ratio);
  if (init.kind == "torus_knot") {
    return make_torus_knot(grid_size, init.wraps, init.windings, init.tube_ratio);
  }
  if (init.kind == "csv") {
    Curve c = read_curve_csv(init.csv_path);
    if (c.grid_size() != grid_size) {
      throw ConfigError(init.csv_path + ": has " + std::to_string(c.grid_size()) +
                        " nodes but grid_size is " + std::to_string(grid_size));
    }
    return c;
  }
  throw ConfigError("unknown initial curve kind '" + init.kind + "'");
}

int run_experiment(const RunParams& p) {
  validate_params(p);
  const SobolevOrder order(p.s);
  const QuadratureGrid grid = grid_for(p, order);
  try {
    std::filesystem::create_directories(p.output_dir);
  } catch (const std::exception& e) {
    throw ConfigError("cannot create output directory " + p.output_dir + ": " + e.what());
  }

  const Curve start = build_initial(p.initial, p.grid_size);
  std::function<void(int, const Curve&)> observer;
  if (p.snapshot_stride > 0) {
    observer = [&p](int step, const Curve& c) {
      if (step % p.snapshot_stride != 0) return;
      char name[64];
      std::snprintf(name, sizeof name, "/snapshot_%06d.csv", step);
      write_curve_csv(c, p.output_dir + name);
    };
  }

  const FlowResult res = run_flow(start, order, grid, p.flow, observer);
  write_trace_csv(res.trace, p.output_dir + "/trace.csv");
  write_curve_csv(res.curve, p.output_dir + "/final_curve.csv");
  if (p.render) write_curve_svg(res.curve, p.output_dir + "/final_curve.svg");

  json fitj;
  try {
    const LojasiewiczFit fit = ls_fit(res.trace, p.tail_fraction);
    fitj["theta"] = fit.theta;
    fitj["log_z"] = fit.log_z;
    fitj["r_squared"] = fit.r_squared;
    fitj["e_infinity"] = fit.e_infinity;
    fitj["rows_used"] = fit.rows_used;
  } catch (const ConfigError& e) {
    fitj["error"] = e.what();
  }

  const TraceRow& last = res.trace.back();
  json report;
  report["params"] = params_to_json(p);
  report["termination"] = res.converged ? "converged" : "max_steps";
  report["steps"] = res.steps;
  report["trace_rows"] = res.trace.size();
  report["final_energy"] = res.final_energy;
  report["final_grad_norm"] = res.final_grad_norm;
  report["final_distortion"] = last.distortion;
  report["final_min_separation"] = last.min_separation;
  report["final_length_residual"] = last.length_residual;
  report["lambda"] = lagrange_multiplier(res.curve, order, grid);
  report["circle_energy_reference"] = circle_energy_reference(order.singular_power());
  report["fit"] = fitj;
  write_json_file(report, p.output_dir + "/report.json");

  return res.converged ? 0 : 3;
}

int verify_suite(const RunParams& p, std::ostream& out) {
  validate_params(p);
  const SobolevOrder order(p.s);
  const double pw = order.singular_power();
  const QuadratureGrid grid = grid_for(p, order);
  const int n = p.grid_size;

  int failures = 0;
  auto line = [&out, &failures](const char* name, bool pass, double value, double tol,
                                const char* what) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-26s %s   (%s %.3g, tol %.3g)\n", name,
                  pass ? "PASS" : "FAIL", what, value, tol);
    out << buf;
    if (!pass) ++failures;
  };

  {
    const double mass = grid.singular_mass();
    const double rel = std::abs(grid.weight_singular().sum() - mass) / mass;
    line("quadrature mass", rel <= 1e-12, rel, 1e-12, "rel err");
  }

  const Curve circle = make_circle(n);
  const double e_circle = tp_energy(circle, order, grid);
  {
    const double ref = circle_energy_reference(pw);
    const double rel = std::abs(e_circle - ref) / ref;
    line("circle energy", rel <= 1e-3, rel, 1e-3, "rel err");
  }
  {
    const double e2 = tp_energy(Curve(2.0 * circle.nodes()), order, grid);
    const double rel = std::abs(e2 - std::pow(2.0, 4.0 - pw) * e_circle) /
                       (std::pow(2.0, 4.0 - pw) * e_circle);
    line("scaling homogeneity", rel <= 1e-10, rel, 1e-10, "rel err");
  }

  const Curve bumpy = retract_to_arclength(make_perturbed_circle(n, 2, 5, 0.05, 7));
  const double e_bumpy = tp_energy(bumpy, order, grid);
  {
    const Field f = d_tp(bumpy, order, grid);
    const Field h = make_random_field(n, 2, 6, 11);
    const double pairing = pair_density(f, h);
    const double eps = 1e-5;
    const double ep = tp_energy(Curve(bumpy.nodes() + eps * h.values), order, grid);
    const double em = tp_energy(Curve(bumpy.nodes() - eps * h.values), order, grid);
    const double fd = (ep - em) / (2.0 * eps);
    const double rel = std::abs(fd - pairing) / std::max(1.0, std::abs(pairing));
    line("gradient vs differences", rel <= 1e-5, rel, 1e-5, "rel err");
  }
  {
    const IntegrandFactors f = integrand_factors(bumpy, order, grid);
    double refit = 0.0;
    for (int j = 0; j < grid.size(); ++j) {
      double col = 0.0;
      for (int i = 0; i < n; ++i) {
        double fsq = 0.0;
        for (const MatrixXd& comp : f.f_component) fsq += comp(i, j) * comp(i, j);
        col += fsq * f.lambda(i, j) * f.lambda(i, j) * f.psi(i, j) * f.psi(i, j);
      }
      refit += grid.weight_plain()[j] / n * col;
    }
    const double rel = std::abs(refit - e_bumpy) / e_bumpy;
    line("integrand factorization", rel <= 1e-10, rel, 1e-10, "rel err");
  }
  {
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const Field k = make_random_field(n, 2, 8, 100 + t);
      const double lhs = phi_norm_sq(phi_operator(k, order, grid), n);
      const double rhs = gagliardo_seminorm_sq(k, order.s - 1.0) / (2.0 * order.s - 1.0);
      worst = std::max(worst, lhs / rhs);
    }
    line("dual seminorm bound", worst <= 1.05, worst, 1.05, "worst ratio");
  }
  {
    Field h = project_tangent(circle, make_random_field(n, 2, 6, 21), order.s);
    Field k = project_tangent(circle, make_random_field(n, 2, 6, 22), order.s);
    h = Field(h.values / std::sqrt(hs_norm_sq(h, order.s)));
    k = Field(k.values / std::sqrt(hs_norm_sq(k, order.s)));
    const double a = d2_tp(circle, h, k, order, grid);
    const double b = d2_tp(circle, k, h, order, grid);
    const double rel = std::abs(a - b) / (1.0 + std::abs(a));
    line("second variation symmetry", rel <= 1e-8, rel, 1e-8, "rel err");
  }

  out << (failures == 0 ? "verify: all checks passed\n"
                        : "verify: " + std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 1;
}

int sweep_experiment(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open sweep file " + config_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(config_path + ": " + e.what());
  }
  check_keys(j, {"output_dir", "runs"}, "sweep");
  std::string base = "sweep_out";
  read_into(j, "output_dir", base, "sweep");
  if (!j.contains("runs") || !j.at("runs").is_array() || j.at("runs").empty()) {
    throw ConfigError("sweep needs a nonempty 'runs' array");
  }

  std::vector<RunParams> runs;
  for (const json& entry : j.at("runs")) runs.push_back(params_from_json(entry));
  std::stable_sort(runs.begin(), runs.end(), [](const RunParams& a, const RunParams& b) {
    if (a.s != b.s) return a.s < b.s;
    return a.grid_size < b.grid_size;
  });

  try {
    std::filesystem::create_directories(base);
  } catch (const std::exception& e) {
    throw ConfigError("cannot create output directory " + base + ": " + e.what());
  }

  json summary = json::array();
  int worst = 0;
  for (size_t i = 0; i < runs.size(); ++i) {
    RunParams p = runs[i];
    char sub[32];
    std::snprintf(sub, sizeof sub, "/run_%03d", static_cast<int>(i));
    p.output_dir = base + sub;
    int code = 0;
    std::string error;
    try {
      code = run_experiment(p);
    } catch (const Error& e) {
      code = e.exit_code();
      error = e.what();
    }
    json row;
    row["index"] = i;
    row["s"] = p.s;
    row["grid_size"] = p.grid_size;
    row["exit_code"] = code;
    if (!error.empty()) row["error"] = error;
    summary.push_back(row);
    worst = std::max(worst, code);
  }
  write_json_file(summary, base + "/sweep.json");
  return worst;
}

} // namespace tpflow

#pragma once

#include "tpflow/constraint.hpp"
#include "tpflow/energy.hpp"

#include <functional>
#include <string>
#include <vector>

// Constrained H^s gradient flow of the tangent-point energy with Armijo
// backtracking and retraction to the arclength manifold after every
// step, plus the decay-rate analysis of the resulting trace.

namespace tpflow {

struct FlowConfig {
  double dt_init = 1e-3;
  double dt_min = 1e-9;
  double dt_max = 0.1;
  double grad_tol = 1e-6;
  int max_steps = 10000;
  double armijo_c = 0.5;
  double dt_grow = 1.5;
  double dt_shrink = 0.5;
  int trace_stride = 1;

  void validate() const; // ConfigError on inconsistent values
};

// One row per recorded state.  dt is the step accepted out of this
// state (zero on the final row); length_residual is |length - 1| after
// retraction.
struct TraceRow {
  double t = 0.0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double distortion = 0.0;
  double min_separation = 0.0;
  double dt = 0.0;
  double length_residual = 0.0;
};

struct FlowResult {
  Curve curve;
  std::vector<TraceRow> trace;
  int steps = 0;
  bool converged = false;
  double final_energy = 0.0;
  double final_grad_norm = 0.0;
};

// Runs the flow from `start` (retracted first).  Throws
// StagnationError when backtracking collapses below dt_min, and lets
// self-intersection of an accepted state propagate.  The observer, when
// set, sees every accepted state including the initial one.
FlowResult run_flow(const Curve& start, const SobolevOrder& order, const QuadratureGrid& grid,
                    const FlowConfig& config,
                    const std::function<void(int, const Curve&)>& observer = {});

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);
std::vector<TraceRow> read_trace_csv(const std::string& path);

// Least-squares fit of log grad_norm = log_z + theta * log(E - E_inf)
// over the qualifying tail of a trace.  E_inf is estimated from the
// last two energies; rows too close to the limit or to roundoff are
// dropped.  Throws ConfigError when fewer than 50 rows qualify or the
// fitted exponent is outside (0, 1.05).
struct LojasiewiczFit {
  double theta = 0.0;
  double log_z = 0.0;
  double r_squared = 0.0;
  double e_infinity = 0.0;
  int rows_used = 0;
};
LojasiewiczFit ls_fit(const std::vector<TraceRow>& trace, double tail_fraction);

// Decay envelope for the distance to the limit under the gradient
// inequality |grad E| >= z (E - E_inf)^theta with initial gap e0:
// exponential at theta = 1/2, power law for theta in (1/2, 1).
double rate_envelope(double theta, double z, double e0, double t);

// Closed polyline of the first two coordinates.
void write_curve_svg(const Curve& curve, const std::string& path);

} // namespace tpflow

#pragma once

#include "tpflow/flow.hpp"

#include <iosfwd>
#include <string>

// Experiment drivers shared by the command line tool and the test
// suites: strict JSON configuration, the flow runner with its report
// files, the invariant verification table, and parameter sweeps.

namespace tpflow {

// 1-D reduction of the energy of the unit-length circle,
//   E = 2 pi^{p-2} int_0^{1/2} sin(pi w)^{4-p} dw,
// evaluated by tanh-sinh quadrature; independent of the product
// quadrature used by tp_energy.
double circle_energy_reference(double p);

struct InitialCurve {
  std::string kind = "perturbed_circle"; // circle | perturbed_circle | ellipse | torus_knot | csv
  int mode_lo = 2;
  int mode_hi = 5;
  double amplitude = 0.03;
  unsigned long long seed = 1;
  double axis_ratio = 2.0;   // ellipse
  int wraps = 2;             // torus knot
  int windings = 3;
  double tube_ratio = 0.25;
  std::string csv_path;
};

struct RunParams {
  double s = 1.75;
  int grid_size = 256;
  InitialCurve initial;
  FlowConfig flow;
  double tail_fraction = 0.4;
  int snapshot_stride = 0; // 0 disables snapshot output
  bool render = true;
  std::string output_dir = ".";
  bool corrupt_quadrature = false; // negative control hook for verify
};

RunParams default_params();

// Strict parse: unknown keys are rejected unless they start with '_'.
// grid_size must be a power of two in [32, 1024] at this layer.
RunParams load_params(const std::string& path);
void validate_params(const RunParams& p);

Curve build_initial(const InitialCurve& init, int grid_size);

// Runs the flow and writes trace.csv, final_curve.csv, report.json and
// (unless disabled) final_curve.svg under output_dir.  Reports are
// byte-identical across reruns of the same configuration.  Returns 0
// on convergence and 3 when max_steps ran out.
int run_experiment(const RunParams& p);

// Invariant table at the configured order and grid size: quadrature
// mass, circle energy against the 1-D reference, scaling homogeneity,
// gradient against finite differences, integrand factorization, the
// dual seminorm bound, and second variation symmetry.  One line per
// check; returns 0 only if every check passes.
int verify_suite(const RunParams& p, std::ostream& out);

// Runs every configuration of the sweep file (JSON object with
// "output_dir" and a "runs" array) in ascending (s, grid_size) order
// into numbered subdirectories; returns the worst exit code.
int sweep_experiment(const std::string& config_path);

} // namespace tpflow

#include "tpflow/errors.hpp"
#include "tpflow/experiment.hpp"
#include "tpflow/reduce.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"tangent-point energy flows on closed curves"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int threads = 0;
  int snapshot_stride = -1;
  bool no_render = false;
  double verify_s = 1.75;
  int verify_grid = 64;

  CLI::App* run = app.add_subcommand("run", "run a gradient flow experiment");
  run->add_option("--config", config_path, "JSON configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--output-dir", output_dir, "override the configured output directory");
  run->add_option("--snapshot-stride", snapshot_stride,
                  "write snapshot_*.csv every K accepted steps (0 disables)");
  run->add_flag("--no-render", no_render, "skip the SVG of the final curve");
  run->add_option("--threads", threads, "worker threads (default: TPFLOW_THREADS or 1)");

  CLI::App* verify = app.add_subcommand("verify", "run the invariant check table");
  verify->add_option("--config", config_path, "JSON configuration file")
      ->check(CLI::ExistingFile);
  verify->add_option("--s", verify_s, "Sobolev order when no config is given");
  verify->add_option("--grid", verify_grid, "grid size when no config is given");
  verify->add_option("--threads", threads, "worker threads");

  CLI::App* sweep = app.add_subcommand("sweep", "run every configuration of a sweep file");
  sweep->add_option("--config", config_path, "sweep JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--threads", threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) tpflow::reduce::set_thread_count(threads);
    if (run->parsed()) {
      tpflow::RunParams p = tpflow::load_params(config_path);
      if (!output_dir.empty()) p.output_dir = output_dir;
      if (snapshot_stride >= 0) p.snapshot_stride = snapshot_stride;
      if (no_render) p.render = false;
      tpflow::validate_params(p);
      return tpflow::run_experiment(p);
    }
    if (verify->parsed()) {
      tpflow::RunParams p = tpflow::default_params();
      if (!config_path.empty()) {
        p = tpflow::load_params(config_path);
      } else {
        p.s = verify_s;
        p.grid_size = verify_grid;
      }
      return tpflow::verify_suite(p, std::cout);
    }
    if (sweep->parsed()) {
      return tpflow::sweep_experiment(config_path);
    }
  } catch (const tpflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end checks of the command line tool named by TPFLOW_CLI_PATH.

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "cli_output.txt";
  const std::string cmd =
      std::string(TPFLOW_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  res.output = ss.str();
  return res;
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "tpflow_cli_tests" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json base_config(const fs::path& out_dir) {
  json j;
  j["s"] = 1.75;
  j["grid_size"] = 32;
  j["initial"] = {{"kind", "perturbed_circle"},
                  {"mode_lo", 2},
                  {"mode_hi", 4},
                  {"amplitude", 0.03},
                  {"seed", 5}};
  j["flow"] = {{"grad_tol", 1e-3}, {"max_steps", 60}};
  j["tail_fraction"] = 0.5;
  j["output_dir"] = out_dir.string();
  return j;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage and parse failures exit with the config code") {
  const fs::path dir = fresh_dir("usage");
  CHECK(run_cli("--help", dir).code == 0);
  const CliResult help = run_cli("--help", dir);
  CHECK(help.output.find("run") != std::string::npos);
  CHECK(help.output.find("verify") != std::string::npos);
  CHECK(help.output.find("sweep") != std::string::npos);

  CHECK(run_cli("", dir).code == 2);
  CHECK(run_cli("run", dir).code == 2);
  CHECK(run_cli("run --config /nonexistent/conf.json", dir).code == 2);
  CHECK(run_cli("verify --bogus-flag", dir).code == 2);
}

TEST_CASE("a flow run writes its reports and converges to the circle") {
  const fs::path dir = fresh_dir("run_basic");
  const fs::path out = dir / "out";
  const fs::path conf = dir / "run.json";
  write_text(conf, base_config(out).dump(2));

  const CliResult res = run_cli("run --config " + conf.string(), dir);
  CHECK(res.code == 0);
  CHECK(fs::exists(out / "trace.csv"));
  CHECK(fs::exists(out / "final_curve.csv"));
  CHECK(fs::exists(out / "final_curve.svg"));
  REQUIRE(fs::exists(out / "report.json"));

  const json report = json::parse(slurp(out / "report.json"));
  CHECK(report.at("termination") == "converged");
  CHECK(report.at("steps").get<int>() > 0);
  const double e_final = report.at("final_energy").get<double>();
  const double e_ref = report.at("circle_energy_reference").get<double>();
  CHECK(std::abs(e_final - e_ref) / e_ref < 1e-2);
  CHECK(report.at("final_grad_norm").get<double>() <= 1e-3);
  CHECK(report.at("final_length_residual").get<double>() < 1e-8);
  CHECK(report.contains("lambda"));
  CHECK(report.contains("fit"));
}

TEST_CASE("reruns of one configuration are byte identical") {
  const fs::path dir = fresh_dir("run_repeat");
  const fs::path out = dir / "out";
  const fs::path conf = dir / "run.json";
  write_text(conf, base_config(out).dump(2));

  REQUIRE(run_cli("run --config " + conf.string(), dir).code == 0);
  const std::string trace_a = slurp(out / "trace.csv");
  const std::string curve_a = slurp(out / "final_curve.csv");
  const std::string report_a = slurp(out / "report.json");
  REQUIRE(!trace_a.empty());

  REQUIRE(run_cli("run --config " + conf.string(), dir).code == 0);
  CHECK(slurp(out / "trace.csv") == trace_a);
  CHECK(slurp(out / "final_curve.csv") == curve_a);
  CHECK(slurp(out / "report.json") == report_a);
}

TEST_CASE("command line overrides redirect output, skip rendering, and snapshot") {
  const fs::path dir = fresh_dir("run_overrides");
  const fs::path conf = dir / "run.json";
  json j = base_config(dir / "ignored");
  j["flow"]["max_steps"] = 6;
  j["flow"]["grad_tol"] = 1e-12;
  write_text(conf, j.dump(2));

  const fs::path out = dir / "redirected";
  const CliResult res = run_cli("run --config " + conf.string() + " --output-dir " +
                                    out.string() + " --no-render --snapshot-stride 2",
                                dir);
  CHECK(res.code == 3); // max_steps exhausted
  CHECK(fs::exists(out / "trace.csv"));
  CHECK_FALSE(fs::exists(out / "final_curve.svg"));
  CHECK(fs::exists(out / "snapshot_000000.csv"));
  CHECK(fs::exists(out / "snapshot_000002.csv"));
  CHECK_FALSE(fs::exists((dir / "ignored") / "trace.csv"));

  const json report = json::parse(slurp(out / "report.json"));
  CHECK(report.at("termination") == "max_steps");
}

TEST_CASE("invalid configurations are rejected with located messages") {
  const fs::path dir = fresh_dir("bad_config");
  const fs::path conf = dir / "bad.json";

  write_text(conf, "{ not json");
  CHECK(run_cli("run --config " + conf.string(), dir).code == 2);

  write_text(conf, R"({"s": 1.75, "grid_size": 32, "unknown_knob": 1})");
  const CliResult unknown = run_cli("run --config " + conf.string(), dir);
  CHECK(unknown.code == 2);
  CHECK(unknown.output.find("unknown_knob") != std::string::npos);

  write_text(conf, R"({"s": 1.75, "grid_size": 48})");
  const CliResult grid = run_cli("run --config " + conf.string(), dir);
  CHECK(grid.code == 2);
  CHECK(grid.output.find("power of two") != std::string::npos);

  write_text(conf, R"({"s": 2.5, "grid_size": 32})");
  CHECK(run_cli("run --config " + conf.string(), dir).code == 2);

  write_text(conf, R"({"s": 1.75, "grid_size": 32, "initial": {"kind": "dodecahedron"}})");
  const CliResult kind = run_cli("run --config " + conf.string(), dir);
  CHECK(kind.code == 2);
  CHECK(kind.output.find("dodecahedron") != std::string::npos);
}

TEST_CASE("verify passes on a sound configuration and flags a corrupted one") {
  const fs::path dir = fresh_dir("verify");
  const CliResult ok = run_cli("verify --s 1.75 --grid 32", dir);
  CHECK(ok.code == 0);
  CHECK(ok.output.find("verify: all checks passed") != std::string::npos);
  for (const char* name : {"quadrature mass", "circle energy", "scaling homogeneity",
                           "gradient vs differences", "integrand factorization",
                           "dual seminorm bound", "second variation symmetry"}) {
    CHECK(ok.output.find(name) != std::string::npos);
  }

  const CliResult threaded = run_cli("verify --s 1.6 --grid 32 --threads 2", dir);
  CHECK(threaded.code == 0);

  const fs::path conf = dir / "corrupt.json";
  write_text(conf, R"({"s": 1.75, "grid_size": 32, "_corrupt_quadrature": true})");
  const CliResult bad = run_cli("verify --config " + conf.string(), dir);
  CHECK(bad.code != 0);
  CHECK(bad.output.find("FAIL") != std::string::npos);
}

TEST_CASE("sweep orders runs, numbers their directories, and summarizes") {
  const fs::path dir = fresh_dir("sweep");
  const fs::path out = dir / "sweep_out";
  json run_hi = base_config(fs::path("unused"));
  run_hi["s"] = 1.75;
  run_hi.erase("output_dir");
  json run_lo = run_hi;
  run_lo["s"] = 1.6;
  json sweep;
  sweep["output_dir"] = out.string();
  sweep["runs"] = json::array({run_hi, run_lo}); // descending on purpose

  const fs::path conf = dir / "sweep.json";
  write_text(conf, sweep.dump(2));
  const CliResult res = run_cli("sweep --config " + conf.string(), dir);
  CHECK(res.code == 0);

  REQUIRE(fs::exists(out / "sweep.json"));
  const json summary = json::parse(slurp(out / "sweep.json"));
  REQUIRE(summary.is_array());
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].at("s").get<double>() == 1.6);
  CHECK(summary[1].at("s").get<double>() == 1.75);
  CHECK(summary[0].at("exit_code").get<int>() == 0);
  CHECK(summary[1].at("exit_code").get<int>() == 0);
  CHECK(fs::exists(out / "run_000" / "report.json"));
  CHECK(fs::exists(out / "run_001" / "report.json"));

  write_text(conf, R"({"output_dir": "x", "runs": []})");
  CHECK(run_cli("sweep --config " + conf.string(), dir).code == 2);
}

} // TEST_SUITE

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "conelab/scenario.hpp"

// Exit codes: 0 all verdicts pass, 1 config or IO error, 2 verdict failure
// (the report is still written).
namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string backend;
  int grid = 0;
  double tol = 0.0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "scenario config (JSON)")->required();
  cmd->add_option("--out", f.out, "directory for the report and CSV artifacts");
  cmd->add_option("--grid", f.grid, "override the surface resolution")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--backend", f.backend, "override the discretization backend")
      ->check(CLI::IsMember({"parametric", "fem"}));
  cmd->add_option("--tol", f.tol, "override the verdict tolerance")
      ->check(CLI::PositiveNumber);
}

int run(const std::string& subcommand, const Flags& f) {
  using namespace conelab;
  RunResult result;
  try {
    Scenario scenario = load_scenario(f.config);
    RunOptions opt;
    opt.subcommand = subcommand;
    opt.out_dir = f.out;
    opt.grid = f.grid;
    opt.backend = f.backend;
    opt.tol = f.tol;
    result = run_scenario(scenario, opt);
  } catch (const Error& e) {
    std::fprintf(stderr, "conelab: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "conelab: %s\n", e.what());
    return 1;
  }
  try {
    for (const auto& [path, contents] : result.artifacts) write_atomic(path, contents);
    write_atomic(result.report_path, result.report_json);
  } catch (const Error& e) {
    std::fprintf(stderr, "conelab: %s\n", e.what());
    return 1;
  }
  std::printf("%s\n", result.report_path.c_str());
  return result.all_passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for weighted geometry of solid cones"};
  app.set_version_flag("--version", std::string("conelab ") + conelab::kToolVersion);
  app.require_subcommand(1);

  Flags flags;
  const char* names[] = {"verify", "spectrum", "sweep", "certify", "variation"};
  const char* descs[] = {
      "geometry checks, Minkowski identities, cutoff energy decay",
      "stability spectrum of the weighted Jacobi operator",
      "parameter sweeps written as CSV",
      "curvature-dimension certification of the density",
      "first and second variation diagnostics",
  };
  for (int i = 0; i < 5; ++i) add_common(app.add_subcommand(names[i], descs[i]), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage problems are config errors
  }

  for (const char* name : names)
    if (app.get_subcommand(name)->parsed()) return run(name, flags);
  return 1;
}

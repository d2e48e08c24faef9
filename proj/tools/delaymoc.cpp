#include "delaymoc/error.hpp"
#include "delaymoc/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace sc = delaymoc::scenario;

int main(int argc, char** argv) {
  CLI::App app{"Delayed-feedback box model: scenarios, sweeps and bifurcation datasets"};
  app.require_subcommand(1);

  std::string file;
  std::string out_dir;
  std::string seed_params;
  int workers = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", file, "Scenario JSON file")->required();
    cmd->add_option("--seed-params", seed_params, "Params file replacing the scenario's own");
  };
  CLI::App* validate = app.add_subcommand("validate", "Check a scenario without running it");
  add_common(validate);
  CLI::App* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
  add_common(run);
  run->add_option("--out", out_dir, "Output root (default: $DELAYMOC_OUT or ./out)");
  run->add_option("--workers", workers, "OpenMP threads for batch kernels")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sc::kExitConfigError;
  }

  std::optional<sc::fs::path> seed;
  if (!seed_params.empty()) seed = seed_params;

  if (validate->parsed()) {
    const auto diag = sc::validate_file(file, seed);
    for (const auto& d : diag) std::cerr << file << ": " << d << '\n';
    if (!diag.empty()) return sc::kExitConfigError;
    std::cout << file << ": ok\n";
    return sc::kExitSuccess;
  }

  try {
    const sc::Scenario scenario = sc::load(file, seed);
    sc::RunOptions opts;
    opts.out_root = out_dir.empty() ? sc::default_out_root() : sc::fs::path(out_dir);
    opts.workers = workers;
    const sc::RunReport report = sc::run(scenario, opts);
    std::cout << report.scenario << ": " << report.artifacts.size() << " artifacts in " << report.out_dir.string()
              << " (" << report.wall_time_s << " s)\n";
    for (const auto& f : report.failures) std::cerr << "failure: " << f << '\n';
    return report.exit_code();
  } catch (const delaymoc::Error& e) {
    std::cerr << file << ": " << e.what() << '\n';
    return sc::kExitConfigError;
  }
}

// Command-line front end: validate scenario files, run closed-loop
// simulations, or solve a single routing instance.

#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relaynet/relaynet.hpp"

int main(int argc, char** argv) {
  CLI::App app{"probabilistic routing and relay placement for mobile robot teams"};
  app.require_subcommand(1);

  relaynet::RunManifest manifest;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", manifest.scenario_path, "scenario JSON file")->required();
  };

  CLI::App* run = app.add_subcommand("run", "simulate a scenario and write metrics");
  add_common(run);
  run->add_option("--out", manifest.out_dir, "output directory")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  run->add_flag("--snapshots", manifest.snapshots, "write per-step JSON snapshots");
  run->add_flag("--dump-cone", manifest.dump_cone, "write per-step cone-program dumps");

  CLI::App* solve = app.add_subcommand("solve-once", "solve one static configuration");
  add_common(solve);
  solve->add_option("--out", manifest.out_dir, "directory for solution.json");
  solve->add_flag("--dump-cone", manifest.dump_cone, "emit the assembled cone program");

  CLI::App* validate = app.add_subcommand("validate", "check a scenario file");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return relaynet::kExitConfigError;
  }

  if (seed_opt->count() > 0) manifest.seed_override = seed;

  if (run->parsed()) return relaynet::cmd_run(manifest);
  if (solve->parsed()) return relaynet::cmd_solve_once(manifest);
  return relaynet::cmd_validate(manifest);
}

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "relaynet/scenario_io.hpp"

namespace relaynet {

struct RunManifest {
  std::string scenario_path;
  std::string out_dir;  // required by cmd_run, optional elsewhere
  std::optional<std::uint64_t> seed_override;
  bool snapshots = false;
  bool dump_cone = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitSolverFailure = 3;

namespace detail {

inline std::string padded_index(int step) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", step);
  return buf;
}

inline RoutingProblem static_to_problem(const StaticProblem& sp) {
  RoutingProblem problem;
  problem.team = assemble_team(sp.task_positions, sp.network_positions);
  problem.rates = predict_rates(sp.channel, problem.team.positions);
  problem.flows = sp.flows;
  problem.r_min = sp.r_min;
  return problem;
}

}  // namespace detail

/// Parses and validates a scenario, reporting what it would run.
inline int cmd_validate(const RunManifest& manifest, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  try {
    const ScenarioConfig cfg = load_scenario_file(manifest.scenario_path, manifest.seed_override);
    validate_scenario(cfg);
    const int p = num_task_agents(cfg.task_trajectory);
    const int q = num_network_agents(cfg.network_mode);
    const int steps = static_cast<int>(std::floor(cfg.duration / cfg.dt + 1e-9));
    out << "ok: " << p << " task agents, " << q << " network agents, " << cfg.flows.size()
        << " flows, " << steps << " steps\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

/// Runs a scenario to completion, streaming metrics.csv (and optional
/// per-step snapshots / cone-program dumps) into the output directory.
/// Partial outputs survive a mid-run solver failure.
inline int cmd_run(const RunManifest& manifest, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;

  ScenarioConfig cfg;
  std::ofstream metrics;
  try {
    cfg = load_scenario_file(manifest.scenario_path, manifest.seed_override);
    validate_scenario(cfg);
    if (manifest.out_dir.empty()) throw invalid_input("run requires an output directory");
    fs::create_directories(manifest.out_dir);
    if (manifest.snapshots) fs::create_directories(fs::path(manifest.out_dir) / "snapshots");
    if (manifest.dump_cone) fs::create_directories(fs::path(manifest.out_dir) / "cone");
    metrics.open(fs::path(manifest.out_dir) / "metrics.csv", std::ios::trunc);
    if (!metrics.good()) throw invalid_input("cannot write to '" + manifest.out_dir + "'");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  const int p = num_task_agents(cfg.task_trajectory);
  const int q = num_network_agents(cfg.network_mode);
  write_metrics_header(metrics, cfg.flows, p + q);

  int rows = 0;
  const StepCallback callback = [&](int step, const MetricsRecord& rec, const RoutingVars& alpha) {
    write_metrics_row(metrics, rec);
    ++rows;
    if (manifest.snapshots) {
      std::ofstream snap(fs::path(manifest.out_dir) / "snapshots" /
                         (detail::padded_index(step) + ".json"));
      snap << snapshot_json(step, rec, alpha, p).dump(2) << '\n';
    }
    if (manifest.dump_cone) {
      RoutingProblem problem;
      problem.team = detail::assemble_team(
          {rec.positions.begin(), rec.positions.begin() + p},
          {rec.positions.begin() + p, rec.positions.end()});
      problem.rates = predict_rates(cfg.channel, problem.team.positions);
      problem.flows = cfg.flows;
      problem.r_min = cfg.r_min;
      std::ofstream dump(fs::path(manifest.out_dir) / "cone" /
                         (detail::padded_index(step) + ".txt"));
      dump_plain_text(build_cone_program(problem).program, dump);
    }
  };

  try {
    run_scenario(cfg, callback);
  } catch (const solver_failure& e) {
    metrics.flush();
    err << "solver failure: " << e.what() << '\n';
    return kExitSolverFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  out << "wrote " << rows << " metric rows to " << manifest.out_dir << "/metrics.csv\n";
  return kExitOk;
}

/// Solves the routing problem for one static configuration and prints the
/// result; with an output directory, also writes solution.json. Infeasible
/// demands exit with the solver code after reporting the binding balance
/// constraints.
inline int cmd_solve_once(const RunManifest& manifest, std::ostream& out = std::cout,
                          std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;

  RoutingProblem problem;
  ConeBuild build;
  try {
    const StaticProblem sp = load_static_problem(load_json_file(manifest.scenario_path));
    problem = detail::static_to_problem(sp);
    build = build_cone_program(problem);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  if (manifest.dump_cone) {
    if (!manifest.out_dir.empty()) {
      fs::create_directories(manifest.out_dir);
      std::ofstream dump(fs::path(manifest.out_dir) / "cone_program.txt");
      dump_plain_text(build.program, dump);
    } else {
      dump_plain_text(build.program, out);
    }
  }

  const RoutingSolution sol = solve_robust_routing(problem);

  if (sol.status == SolveStatus::numerical_failure) {
    err << "solver failure: no certificate within the iteration limit\n";
    return kExitSolverFailure;
  }

  if (sol.status == SolveStatus::infeasible) {
    out << "status: infeasible\n";
    // Quantify how the demands fail: best slack with the sign restriction
    // dropped, then each balance constraint's residual at s = 0.
    SolveOptions options;
    options.nonneg_slack = false;
    const RoutingSolution relaxed = solve_robust_routing(problem, options);
    if (relaxed.status == SolveStatus::optimal) {
      out << "best slack (sign-free): " << format_double(relaxed.slack) << '\n';
      struct PairResidual {
        PairRef pair;
        double residual;
      };
      std::vector<PairResidual> residuals;
      for (const PairRef& pair : build.pairs) {
        const MarginStats ms = margin_stats(relaxed.alpha, problem.rates, pair.node, pair.flow);
        const FlowSpec& flow = problem.flows[pair.flow];
        const double res =
            ms.mean - node_margin(flow, pair.node) - probit(flow.confidence) * std::sqrt(ms.var);
        residuals.push_back({pair, res});
      }
      std::sort(residuals.begin(), residuals.end(),
                [](const PairResidual& a, const PairResidual& b) { return a.residual < b.residual; });
      out << "binding balance constraints (worst first):\n";
      for (std::size_t r = 0; r < residuals.size() && residuals[r].residual < 1e-9; ++r) {
        out << "  node " << residuals[r].pair.node << " flow " << residuals[r].pair.flow << ": "
            << format_double(residuals[r].residual) << '\n';
      }
    }
    return kExitSolverFailure;
  }

  const double nu = min_constraint_value(problem.team, problem.flows, problem.rates, sol.alpha);
  out << "status: optimal\n";
  out << "slack: " << format_double(sol.slack) << '\n';
  out << "nu: " << format_double(nu) << '\n';

  struct Entry {
    VarRef ref;
    double value;
  };
  std::vector<Entry> entries;
  const int n = problem.team.size();
  for (int k = 0; k < static_cast<int>(problem.flows.size()); ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (const double a = sol.alpha(i, j, k); a != 0.0) entries.push_back({{i, j, k}, a});
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::abs(a.value) > std::abs(b.value);
  });
  out << "routes: " << entries.size() << '\n';
  for (const Entry& e : entries) {
    out << "  alpha[f" << e.ref.k << ":" << e.ref.i << "->" << e.ref.j
        << "] = " << format_double(e.value) << '\n';
  }

  if (!manifest.out_dir.empty()) {
    try {
      fs::create_directories(manifest.out_dir);
      json positions = json::array();
      for (const Vec2& v : problem.team.positions) positions.push_back({v.x(), v.y()});
      const json doc = {{"status", "optimal"},
                        {"slack", sol.slack},
                        {"nu", finite_or_string(nu)},
                        {"positions", std::move(positions)},
                        {"task_idx", problem.team.task_idx},
                        {"network_idx", problem.team.network_idx},
                        {"alpha", alpha_to_json(sol.alpha)}};
      std::ofstream f(fs::path(manifest.out_dir) / "solution.json");
      f << doc.dump(2) << '\n';
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitConfigError;
    }
  }

  return kExitOk;
}

}  // namespace relaynet

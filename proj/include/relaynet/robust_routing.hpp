#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "relaynet/channel.hpp"
#include "relaynet/cone.hpp"
#include "relaynet/core.hpp"
#include "relaynet/ipm.hpp"
#include "relaynet/routing.hpp"
#include "relaynet/team.hpp"

namespace relaynet {

/// One slack-maximizing routing instance over a fixed team configuration.
struct RoutingProblem {
  TeamConfig team;
  std::vector<FlowSpec> flows;
  RateTable rates;
  double r_min = 1e-4;  // links with mean rate below this are pruned
};

enum class SolveStatus { optimal, infeasible, numerical_failure };

struct RoutingSolution {
  RoutingVars alpha;
  double slack = -kInfinity;
  SolveStatus status = SolveStatus::numerical_failure;
  int iterations = 0;
};

struct SolveOptions {
  ConeSettings cone;
  /// With true (default) the slack is constrained nonnegative and an
  /// unsupportable demand reports infeasible. With false the slack may go
  /// negative, making every instance feasible; the sign of the optimum then
  /// tells how far the demand is from supportable.
  bool nonneg_slack = true;
  double clamp_tol = 1e-6;  // alpha entries below this are zeroed post-solve
};

/// Identifies routing variable columns and constraint blocks of the built
/// cone program.
struct VarRef {
  int i, j, k;
};
struct PairRef {
  int node, flow;
};

struct ConeBuild {
  ConeProgram program;
  std::vector<VarRef> vars;    // column order; the slack is the extra last column
  int slack_col = 0;
  std::vector<PairRef> pairs;  // one per second-order cone block, in order
};

inline void validate_problem(const RoutingProblem& problem) {
  validate_team(problem.team);
  validate_flows(problem.team, problem.flows);
  const int n = problem.team.size();
  if (problem.rates.mean.rows() != n || problem.rates.mean.cols() != n ||
      problem.rates.var.rows() != n || problem.rates.var.cols() != n) {
    throw invalid_input("rate table size does not match team size");
  }
  if (!problem.rates.mean.allFinite() || !problem.rates.var.allFinite()) {
    throw invalid_input("rate table must be finite");
  }
  detail::check_finite(problem.r_min, "r_min");
}

/// A routing variable alpha(i, j, k) exists when i may transmit flow k
/// (sources of k and relays; other task agents are clients only), j may
/// accept it (anything but i itself and flow k's sources), and the link
/// carries a usable rate.
inline bool triple_allowed(const RoutingProblem& problem, int i, int j, int k) {
  const FlowSpec& flow = problem.flows[k];
  if (i == j) return false;
  const bool i_relay = contains(problem.team.network_idx, i);
  if (!i_relay && !contains(flow.sources, i)) return false;
  if (contains(flow.sources, j)) return false;
  const bool j_relay = contains(problem.team.network_idx, j);
  if (!j_relay && !contains(flow.destinations, j)) return false;
  return problem.rates.mean(i, j) >= problem.r_min;
}

/// Assembles the conic program:
///
///   minimize -s  over (alpha, s)
///   s.t.  0 <= alpha <= 1, transmit/receive budgets, [s >= 0,]
///         mean_margin(i,k) - demand(i,k) - s >= z_k * ||sqrt(var) .* alpha||
///                                    for every constrained pair (i, k).
inline ConeBuild build_cone_program(const RoutingProblem& problem, bool nonneg_slack = true) {
  validate_problem(problem);
  const int n = problem.team.size();
  const int num_flows = static_cast<int>(problem.flows.size());

  ConeBuild build;
  // Column order: flow-major enumeration of allowed triples, slack last.
  std::vector<std::vector<int>> col_of(num_flows, std::vector<int>(n * n, -1));
  for (int k = 0; k < num_flows; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (!triple_allowed(problem, i, j, k)) continue;
        col_of[k][i * n + j] = static_cast<int>(build.vars.size());
        build.vars.push_back({i, j, k});
      }
    }
  }
  const int num_alpha = static_cast<int>(build.vars.size());
  build.slack_col = num_alpha;
  const int num_vars = num_alpha + 1;

  ConeProgram& prog = build.program;
  prog.var_names.reserve(num_vars);
  for (const VarRef& v : build.vars) {
    prog.var_names.push_back("alpha[f" + std::to_string(v.k) + ":" + std::to_string(v.i) +
                             "->" + std::to_string(v.j) + "]");
  }
  prog.var_names.push_back("s");

  // Linear rows: bounds for each variable, then per-node transmit/receive
  // budgets (only where at least two variables share the budget; single-term
  // budgets duplicate the box bound), then optionally s >= 0.
  struct LinRow {
    std::vector<std::pair<int, double>> coeffs;
    double rhs;
    std::string name;
  };
  std::vector<LinRow> lin;
  for (int v = 0; v < num_alpha; ++v) {
    lin.push_back({{{v, -1.0}}, 0.0, "nonneg:" + prog.var_names[v]});
  }
  for (int v = 0; v < num_alpha; ++v) {
    lin.push_back({{{v, 1.0}}, 1.0, "cap:" + prog.var_names[v]});
  }
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> tx, rx;
    for (int k = 0; k < num_flows; ++k) {
      for (int j = 0; j < n; ++j) {
        if (int col = col_of[k][i * n + j]; col >= 0) tx.emplace_back(col, 1.0);
        if (int col = col_of[k][j * n + i]; col >= 0) rx.emplace_back(col, 1.0);
      }
    }
    if (tx.size() >= 2) lin.push_back({std::move(tx), 1.0, "tx_budget:" + std::to_string(i)});
    if (rx.size() >= 2) lin.push_back({std::move(rx), 1.0, "rx_budget:" + std::to_string(i)});
  }
  if (nonneg_slack) {
    lin.push_back({{{build.slack_col, -1.0}}, 0.0, "nonneg:s"});
  }

  // One cone block per constrained pair: sources of each flow plus every
  // relay. Block rows are [t; u] with t = mean margin - demand - s and
  // u the per-link deviation terms, so t >= ||u|| is the chance constraint.
  struct SocBlock {
    PairRef pair;
    std::vector<int> out_cols, in_cols;
  };
  std::vector<SocBlock> blocks;
  for (int k = 0; k < num_flows; ++k) {
    const FlowSpec& flow = problem.flows[k];
    for (int i = 0; i < n; ++i) {
      if (!contains(flow.sources, i) && !contains(problem.team.network_idx, i)) continue;
      SocBlock block;
      block.pair = {i, k};
      for (int j = 0; j < n; ++j) {
        if (int col = col_of[k][i * n + j]; col >= 0) block.out_cols.push_back(col);
      }
      for (int j = 0; j < n; ++j) {
        if (int col = col_of[k][j * n + i]; col >= 0) block.in_cols.push_back(col);
      }
      blocks.push_back(std::move(block));
    }
  }

  int num_rows = static_cast<int>(lin.size());
  prog.lin_dim = num_rows;
  for (const SocBlock& block : blocks) {
    const int dim = 1 + static_cast<int>(block.out_cols.size() + block.in_cols.size());
    prog.soc_dims.push_back(dim);
    num_rows += dim;
  }

  prog.c = Eigen::VectorXd::Zero(num_vars);
  prog.c(build.slack_col) = -1.0;  // maximize s
  prog.G = Eigen::MatrixXd::Zero(num_rows, num_vars);
  prog.h = Eigen::VectorXd::Zero(num_rows);
  prog.row_names.resize(num_rows);

  int row = 0;
  for (const LinRow& lr : lin) {
    for (const auto& [col, coeff] : lr.coeffs) prog.G(row, col) = coeff;
    prog.h(row) = lr.rhs;
    prog.row_names[row] = lr.name;
    ++row;
  }
  for (const SocBlock& block : blocks) {
    const auto [i, k] = block.pair;
    const FlowSpec& flow = problem.flows[k];
    const double z = probit(flow.confidence);
    const std::string pair_name = "pair[f" + std::to_string(k) + ":" + std::to_string(i) + "]";
    build.pairs.push_back(block.pair);

    // t row: slack of the row is mean_margin - demand - s.
    for (int col : block.out_cols) prog.G(row, col) = -problem.rates.mean(i, build.vars[col].j);
    for (int col : block.in_cols) prog.G(row, col) = problem.rates.mean(build.vars[col].i, i);
    prog.G(row, build.slack_col) = 1.0;
    prog.h(row) = -node_margin(flow, i);
    prog.row_names[row] = pair_name + ":margin";
    ++row;

    // u rows: slack of each row is z * sqrt(link var) * alpha.
    for (int col : block.out_cols) {
      prog.G(row, col) = -z * std::sqrt(problem.rates.var(i, build.vars[col].j));
      prog.row_names[row] = pair_name + ":dev:" + prog.var_names[col];
      ++row;
    }
    for (int col : block.in_cols) {
      prog.G(row, col) = -z * std::sqrt(problem.rates.var(build.vars[col].i, i));
      prog.row_names[row] = pair_name + ":dev:" + prog.var_names[col];
      ++row;
    }
  }

  return build;
}

inline RoutingSolution solve_robust_routing(const RoutingProblem& problem,
                                            const SolveOptions& options = {}) {
  ConeBuild build = build_cone_program(problem, options.nonneg_slack);
  const int n = problem.team.size();
  const int num_flows = static_cast<int>(problem.flows.size());

  RoutingSolution solution;
  solution.alpha = RoutingVars(n, num_flows);

  // With no routing variables the problem is separable: every constrained
  // pair demands -margin - s >= 0, so the best slack is the smallest -margin.
  if (build.vars.empty()) {
    double slack = kInfinity;
    for (const PairRef& pair : build.pairs) {
      slack = std::min(slack, -node_margin(problem.flows[pair.flow], pair.node));
    }
    if (build.pairs.empty()) slack = 0.0;
    if (options.nonneg_slack && slack < 0.0) {
      solution.status = SolveStatus::infeasible;
      return solution;
    }
    solution.status = SolveStatus::optimal;
    solution.slack = slack;
    return solution;
  }

  const ConeSolution cone = solve_cone_program(build.program, options.cone);
  solution.iterations = cone.iterations;

  switch (cone.status) {
    case ConeStatus::optimal:
      break;
    case ConeStatus::primal_infeasible:
      solution.status = SolveStatus::infeasible;
      return solution;
    default:
      solution.status = SolveStatus::numerical_failure;
      return solution;
  }

  for (std::size_t v = 0; v < build.vars.size(); ++v) {
    const VarRef& ref = build.vars[v];
    double a = cone.x(static_cast<int>(v));
    a = std::clamp(a, 0.0, 1.0);
    if (a < options.clamp_tol) a = 0.0;  // do not route on numerical dust
    solution.alpha(ref.i, ref.j, ref.k) = a;
  }
  solution.slack = cone.x(build.slack_col);
  solution.status = SolveStatus::optimal;
  return solution;
}

/// Largest uniform multiplier t (10 bisection steps over [0, 1]) such that
/// the flows with margins scaled by t remain supportable. Probes solve the
/// slack-unrestricted variant, which is feasible by construction, and accept
/// when the optimal free slack is nonnegative (within tolerance).
inline double boundary_margin_multiplier(const RoutingProblem& problem, int bisection_steps = 10,
                                         const ConeSettings& cone = {}) {
  validate_problem(problem);
  const double tol = 1e-7;
  auto supportable = [&](double t) {
    RoutingProblem scaled = problem;
    for (FlowSpec& flow : scaled.flows) flow.margin *= t;
    SolveOptions options;
    options.cone = cone;
    options.nonneg_slack = false;
    const RoutingSolution probe = solve_robust_routing(scaled, options);
    return probe.status == SolveStatus::optimal && probe.slack >= -tol;
  };

  if (supportable(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int step = 0; step < bisection_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (supportable(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace relaynet

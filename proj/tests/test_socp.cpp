#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relaynet/robust_routing.hpp"

using namespace relaynet;
using Catch::Matchers::WithinAbs;
using nlohmann::json;

namespace {

RoutingProblem load_problem(const std::string& name, json* raw = nullptr) {
  std::ifstream in(std::string(RELAYNET_TEST_DATA) + "/" + name + ".json");
  REQUIRE(in.good());
  const json j = json::parse(in);
  if (raw) *raw = j;

  RoutingProblem problem;
  const int n = j["n"];
  problem.team.positions.assign(n, Vec2::Zero());
  problem.team.task_idx = j["task"].get<std::vector<int>>();
  problem.team.network_idx = j["net"].get<std::vector<int>>();
  problem.r_min = j["r_min"];
  for (const json& f : j["flows"]) {
    FlowSpec flow;
    flow.sources = f["sources"].get<std::vector<int>>();
    flow.destinations = f["destinations"].get<std::vector<int>>();
    flow.margin = f["margin"];
    flow.confidence = f["confidence"];
    problem.flows.push_back(flow);
  }
  problem.rates.mean.resize(n, n);
  problem.rates.var.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j2 = 0; j2 < n; ++j2) {
      problem.rates.mean(i, j2) = j["rate_mean"][i][j2];
      problem.rates.var(i, j2) = j["rate_var"][i][j2];
    }
  }
  return problem;
}

void check_solution_sanity(const RoutingProblem& problem, const RoutingSolution& sol) {
  const int n = problem.team.size();
  const int kf = static_cast<int>(problem.flows.size());

  // Variable bounds and per-node budgets.
  for (int i = 0; i < n; ++i) {
    double tx = 0.0, rx = 0.0;
    for (int k = 0; k < kf; ++k) {
      for (int j = 0; j < n; ++j) {
        const double a = sol.alpha(i, j, k);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0 + 1e-9);
        tx += a;
        rx += sol.alpha(j, i, k);
      }
    }
    CHECK(tx <= 1.0 + 1e-6);
    CHECK(rx <= 1.0 + 1e-6);
  }

  // Pruned or disallowed links carry no traffic.
  for (int k = 0; k < kf; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (!triple_allowed(problem, i, j, k)) CHECK(sol.alpha(i, j, k) == 0.0);
      }
    }
  }

  // Mass balance per flow.
  for (int k = 0; k < kf; ++k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += margin_stats(sol.alpha, problem.rates, i, k).mean;
    CHECK_THAT(total, WithinAbs(0.0, 1e-9));
  }
}

}  // namespace

TEST_CASE("recorded instances reproduce their optimal slack") {
  const std::string names[] = {
      "socp_analytic_2node", "socp_capacity_infeasible",
      "socp_lp_reduction",   "socp_split_chain",
      "socp_patrol_q1_r10",  "socp_patrol_q1_r20_infeas",
      "socp_all_pruned",     "socp_all_pruned_zero_m",
      "socp_random_0",       "socp_random_1",
      "socp_random_2",       "socp_random_3",
      "socp_random_4",       "socp_random_5",
  };

  for (const std::string& name : names) {
    DYNAMIC_SECTION(name) {
      json raw;
      const RoutingProblem problem = load_problem(name, &raw);
      const RoutingSolution sol = solve_robust_routing(problem);

      if (raw["expected_status"] == "optimal") {
        REQUIRE(sol.status == SolveStatus::optimal);
        CHECK_THAT(sol.slack, WithinAbs(raw["expected_slack"].get<double>(), 1e-5));
        CHECK(sol.slack >= -1e-9);
        check_solution_sanity(problem, sol);

        // A feasible plan keeps every chance constraint satisfied.
        const double nu =
            min_constraint_value(problem.team, problem.flows, problem.rates, sol.alpha);
        CHECK(nu >= -1e-6);
      } else {
        REQUIRE(sol.status == SolveStatus::infeasible);
        CHECK(sol.slack == -kInfinity);
      }
    }
  }
}

TEST_CASE("two-node instance builds the minimal program") {
  const RoutingProblem problem = load_problem("socp_analytic_2node");
  const ConeBuild build = build_cone_program(problem);

  // One usable link and the slack variable.
  REQUIRE(build.vars.size() == 1);
  CHECK(build.vars[0].i == 0);
  CHECK(build.vars[0].j == 1);
  CHECK(build.vars[0].k == 0);
  CHECK(build.slack_col == 1);
  CHECK(build.program.num_vars() == 2);

  // alpha >= 0, alpha <= 1, s >= 0; no shared budgets with a single variable.
  CHECK(build.program.lin_dim == 3);

  // One balance constraint (the source) of size 1 + 1 link.
  REQUIRE(build.program.soc_dims == std::vector<int>{2});
  REQUIRE(build.pairs.size() == 1);
  CHECK(build.pairs[0].node == 0);
  CHECK(build.pairs[0].flow == 0);

  CHECK(build.program.c(0) == 0.0);
  CHECK(build.program.c(1) == -1.0);

  // Closed form: s* = R - m - z*sqrt(V) at alpha = 1.
  const double z = probit(problem.flows[0].confidence);
  const double expected =
      problem.rates.mean(0, 1) - problem.flows[0].margin - z * std::sqrt(problem.rates.var(0, 1));
  const RoutingSolution sol = solve_robust_routing(problem);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK_THAT(sol.slack, WithinAbs(expected, 1e-7));
  CHECK_THAT(sol.alpha(0, 1, 0), WithinAbs(1.0, 1e-6));
  CHECK_THAT(min_constraint_value(problem.team, problem.flows, problem.rates, sol.alpha),
             WithinAbs(2.7255994872919592, 1e-9));
}

TEST_CASE("cone rows evaluate to the balance expressions") {
  // Any candidate point must make the assembled rows agree with the margin
  // statistics they encode.
  const RoutingProblem problem = load_problem("socp_split_chain");
  const ConeBuild build = build_cone_program(problem);
  const RoutingSolution sol = solve_robust_routing(problem);
  REQUIRE(sol.status == SolveStatus::optimal);

  Eigen::VectorXd x(build.program.num_vars());
  for (std::size_t v = 0; v < build.vars.size(); ++v) {
    const VarRef& ref = build.vars[v];
    x(static_cast<int>(v)) = sol.alpha(ref.i, ref.j, ref.k);
  }
  x(build.slack_col) = sol.slack;

  const Eigen::VectorXd residual = build.program.h - build.program.G * x;
  int row = build.program.lin_dim;
  for (std::size_t b = 0; b < build.pairs.size(); ++b) {
    const auto [i, k] = build.pairs[b];
    const MarginStats ms = margin_stats(sol.alpha, problem.rates, i, k);
    const double z = probit(problem.flows[k].confidence);
    const double demand = node_margin(problem.flows[k], i);

    const int dim = build.program.soc_dims[b];
    CHECK_THAT(residual(row), WithinAbs(ms.mean - demand - sol.slack, 1e-9));
    const double tail = residual.segment(row + 1, dim - 1).norm();
    CHECK_THAT(tail, WithinAbs(z * std::sqrt(ms.var), 1e-9));
    row += dim;
  }
  CHECK(row == build.program.num_rows());
}

TEST_CASE("optimal slack responds monotonically to demands") {
  // Use an instance with a comfortable slack reserve so the perturbed
  // variants stay feasible.
  RoutingProblem problem = load_problem("socp_random_0");
  const RoutingSolution base = solve_robust_routing(problem);
  REQUIRE(base.status == SolveStatus::optimal);
  REQUIRE(base.slack > 0.05);

  SECTION("raising the margin lowers the slack") {
    RoutingProblem harder = problem;
    for (FlowSpec& f : harder.flows) f.margin += 0.02;
    const RoutingSolution sol = solve_robust_routing(harder);
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.slack < base.slack - 1e-4);
  }

  SECTION("raising the confidence lowers the slack") {
    RoutingProblem harder = problem;
    for (FlowSpec& f : harder.flows) {
      REQUIRE(f.confidence <= 0.95);
      f.confidence += 0.02;
    }
    const RoutingSolution sol = solve_robust_routing(harder);
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.slack < base.slack - 1e-4);
  }
}

TEST_CASE("tiny entries are cleaned out of returned plans") {
  for (const std::string name : {"socp_random_0", "socp_random_3", "socp_patrol_q1_r10"}) {
    const RoutingProblem problem = load_problem(name);
    const RoutingSolution sol = solve_robust_routing(problem);
    REQUIRE(sol.status == SolveStatus::optimal);
    const int n = problem.team.size();
    for (int k = 0; k < static_cast<int>(problem.flows.size()); ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double a = sol.alpha(i, j, k);
          CHECK((a == 0.0 || a >= 1e-6));
        }
  }
}

TEST_CASE("slack-unrestricted variant quantifies infeasibility") {
  json raw;
  const RoutingProblem problem = load_problem("socp_capacity_infeasible", &raw);

  SolveOptions options;
  options.nonneg_slack = false;
  const RoutingSolution sol = solve_robust_routing(problem, options);
  REQUIRE(sol.status == SolveStatus::optimal);

  // Two nodes, one link: best free slack is R - m - z*sqrt(V) < 0.
  const double z = probit(problem.flows[0].confidence);
  const double expected =
      problem.rates.mean(0, 1) - problem.flows[0].margin - z * std::sqrt(problem.rates.var(0, 1));
  REQUIRE(expected < 0.0);
  CHECK_THAT(sol.slack, WithinAbs(expected, 1e-6));
}

TEST_CASE("boundary search brackets the supportable demand scale") {
  SECTION("feasible instances support their full demand") {
    const RoutingProblem problem = load_problem("socp_split_chain");
    CHECK(boundary_margin_multiplier(problem) == 1.0);
  }

  SECTION("two-node overload has a closed-form breakpoint") {
    const RoutingProblem problem = load_problem("socp_capacity_infeasible");
    const double z = probit(problem.flows[0].confidence);
    const double t_crit =
        (problem.rates.mean(0, 1) - z * std::sqrt(problem.rates.var(0, 1))) /
        problem.flows[0].margin;
    REQUIRE(t_crit > 0.0);
    REQUIRE(t_crit < 1.0);

    const double mult = boundary_margin_multiplier(problem);
    CHECK(mult <= t_crit + 1e-6);
    CHECK_THAT(mult, WithinAbs(t_crit, 1.1 / 1024.0));

    // The reported scale is itself supportable.
    RoutingProblem scaled = problem;
    for (FlowSpec& f : scaled.flows) f.margin *= mult;
    SolveOptions options;
    options.nonneg_slack = false;
    const RoutingSolution probe = solve_robust_routing(scaled, options);
    REQUIRE(probe.status == SolveStatus::optimal);
    CHECK(probe.slack >= -1e-7);
  }
}

TEST_CASE("degenerate instances take the variable-free path") {
  SECTION("all links pruned with positive demand") {
    const RoutingProblem problem = load_problem("socp_all_pruned");
    const ConeBuild build = build_cone_program(problem);
    CHECK(build.vars.empty());
    const RoutingSolution sol = solve_robust_routing(problem);
    CHECK(sol.status == SolveStatus::infeasible);
  }

  SECTION("all links pruned with zero demand") {
    const RoutingProblem problem = load_problem("socp_all_pruned_zero_m");
    const RoutingSolution sol = solve_robust_routing(problem);
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.slack == 0.0);
  }
}

TEST_CASE("zero-variance instances reduce to linear programs") {
  json raw;
  const RoutingProblem problem = load_problem("socp_lp_reduction", &raw);
  CHECK(problem.rates.var.maxCoeff() == 0.0);

  const RoutingSolution sol = solve_robust_routing(problem);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK_THAT(sol.slack, WithinAbs(raw["expected_slack"].get<double>(), 1e-5));

  // With no variance anywhere the satisfied constraints sit at +infinity.
  CHECK(min_constraint_value(problem.team, problem.flows, problem.rates, sol.alpha) ==
        kInfinity);
}

TEST_CASE("programs print in a readable plain-text form") {
  const RoutingProblem problem = load_problem("socp_analytic_2node");
  const ConeBuild build = build_cone_program(problem);

  std::ostringstream out;
  dump_plain_text(build.program, out);
  const std::string text = out.str();

  CHECK(text.rfind("cone-program v1", 0) == 0);
  CHECK(text.find("vars 2") != std::string::npos);
  CHECK(text.find("lin 3") != std::string::npos);
  CHECK(text.find("soc 2") != std::string::npos);
  CHECK(text.find("alpha[f0:0->1]") != std::string::npos);
  CHECK(text.find("\nend\n") != std::string::npos);
}

#pragma once

#include <utility>
#include <vector>

#include "relaynet/channel.hpp"
#include "relaynet/core.hpp"
#include "relaynet/robust_routing.hpp"
#include "relaynet/routing.hpp"
#include "relaynet/team.hpp"

namespace relaynet {

struct ControllerParams {
  int max_it = 20;               // candidate draws per step
  double sample_stddev = 1.0;    // meters, per-axis candidate perturbation
  double collision_dist = 1.0;   // meters, minimum pairwise separation
  std::uint64_t seed = 0;
};

/// Persistent controller memory between steps: the network-team target it is
/// steering toward plus the most recent routing solutions.
struct ControllerState {
  ControllerState() = default;
  explicit ControllerState(const ControllerParams& params) : rng(params.seed) {}

  std::vector<Vec2> target_config;
  RoutingVars last_alpha;
  RoutingVars last_alpha_star;
  Rng rng;
  bool initialized = false;
};

struct SampleResult {
  std::vector<Vec2> positions;
  /// Set when 100 draws in a row collided and the unperturbed positions were
  /// returned instead.
  bool exhausted = false;
};

namespace detail {

inline bool collision_free(const std::vector<Vec2>& config, double min_dist) {
  for (std::size_t a = 0; a < config.size(); ++a) {
    for (std::size_t b = a + 1; b < config.size(); ++b) {
      if ((config[a] - config[b]).norm() <= min_dist) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Draws one collision-free candidate placement for the network team by
/// jointly perturbing every relay with an isotropic normal. full_config lists
/// every agent's current position with the network team last, matching x_net;
/// the candidate is checked against the non-network prefix.
inline SampleResult draw_sample(const std::vector<Vec2>& x_net,
                                const std::vector<Vec2>& full_config,
                                const ControllerParams& params, Rng& rng) {
  const std::size_t q = x_net.size();
  if (full_config.size() < q) throw invalid_input("full configuration smaller than network team");
  const std::size_t fixed = full_config.size() - q;

  std::vector<Vec2> candidate_full = full_config;
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (std::size_t r = 0; r < q; ++r) {
      candidate_full[fixed + r] =
          x_net[r] + params.sample_stddev * Vec2(rng.normal(), rng.normal());
    }
    if (detail::collision_free(candidate_full, params.collision_dist)) {
      return {{candidate_full.begin() + fixed, candidate_full.end()}, false};
    }
  }
  return {x_net, true};
}

/// One controller invocation's outputs: the plan to route with right now and
/// diagnostics about the step.
struct ControllerStep {
  RoutingVars alpha;        // routing plan for the current configuration
  double slack = -kInfinity;       // optimal slack at the current configuration
  double benchmark = 0.0;          // best known ν at the target after the search
  double benchmark_at_target = 0.0;  // ν at the incoming target, before the search
  bool feasible = false;    // current configuration supports the demands
  bool target_changed = false;
  bool sample_exhausted = false;  // some draw fell back to the unperturbed positions
  bool solver_failed = false;     // a solve ended in a numerical failure
};

namespace detail {

inline TeamConfig assemble_team(const std::vector<Vec2>& x_task, const std::vector<Vec2>& x_net) {
  TeamConfig team;
  team.positions = x_task;
  team.positions.insert(team.positions.end(), x_net.begin(), x_net.end());
  const int p = static_cast<int>(x_task.size());
  const int n = static_cast<int>(team.positions.size());
  for (int i = 0; i < p; ++i) team.task_idx.push_back(i);
  for (int i = p; i < n; ++i) team.network_idx.push_back(i);
  return team;
}

}  // namespace detail

/// Local search for a better network-team placement. Solves the routing
/// problem at the current and target configurations, then tries max_it
/// random candidates around the current placement, scoring each with the
/// current plan's worst constraint value -- no solve happens inside the
/// loop -- and adopts any candidate that beats the target's benchmark.
inline ControllerStep controller_step(ControllerState& state, const std::vector<Vec2>& x_net,
                                      const std::vector<Vec2>& x_task,
                                      const ControllerParams& params,
                                      const ChannelParams& channel,
                                      const std::vector<FlowSpec>& flows, double r_min = 1e-4) {
  if (!state.initialized) {
    state.target_config = x_net;
    state.initialized = true;
  }
  if (state.target_config.size() != x_net.size()) {
    throw invalid_input("target configuration size does not match network team");
  }

  ControllerStep step;

  // Plan for where the team actually is.
  RoutingProblem current;
  current.team = detail::assemble_team(x_task, x_net);
  current.flows = flows;
  current.rates = predict_rates(channel, current.team.positions);
  current.r_min = r_min;
  const RoutingSolution sol_current = solve_robust_routing(current);
  step.feasible = sol_current.status == SolveStatus::optimal;
  step.solver_failed = sol_current.status == SolveStatus::numerical_failure;
  step.alpha = sol_current.alpha;  // zeroed unless optimal
  step.slack = sol_current.slack;

  // Benchmark at the target the team is steering toward.
  RoutingProblem target = current;
  target.team = detail::assemble_team(x_task, state.target_config);
  target.rates = predict_rates(channel, target.team.positions);
  const RoutingSolution sol_target = solve_robust_routing(target);
  step.solver_failed = step.solver_failed || sol_target.status == SolveStatus::numerical_failure;
  double best =
      min_constraint_value(target.team, flows, target.rates, sol_target.alpha);
  step.benchmark_at_target = best;

  for (int it = 0; it < params.max_it; ++it) {
    const SampleResult sample =
        draw_sample(x_net, current.team.positions, params, state.rng);
    step.sample_exhausted = step.sample_exhausted || sample.exhausted;

    const TeamConfig cand_team = detail::assemble_team(x_task, sample.positions);
    const RateTable cand_rates = predict_rates(channel, cand_team.positions);
    const double value = min_constraint_value(cand_team, flows, cand_rates, step.alpha);
    if (value > best) {
      best = value;
      state.target_config = sample.positions;
      step.target_changed = true;
    }
  }

  step.benchmark = best;
  state.last_alpha = step.alpha;
  state.last_alpha_star = sol_target.alpha;
  return step;
}

}  // namespace relaynet

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "relaynet/channel.hpp"
#include "relaynet/controller.hpp"
#include "relaynet/core.hpp"
#include "relaynet/robust_routing.hpp"
#include "relaynet/team.hpp"

namespace relaynet {

/// Raised when a routing solve inside a running scenario ends in a numerical
/// failure (as opposed to an honest infeasibility, which is a normal outcome).
struct solver_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Task agents orbit a common center, one phase offset each.
struct CirclePatrol {
  double radius = 20.0;
  Vec2 center = Vec2::Zero();
  double angular_speed = 0.05;        // rad/s
  std::vector<double> initial_phases;  // one per task agent
};

/// Task agents follow per-agent polylines at constant speed and hold at the
/// final vertex. speed == 0 means "use the scenario's agent_speed_limit".
struct WaypointPaths {
  std::vector<std::vector<Vec2>> paths;
  double speed = 0.0;
};

using TaskTrajectory = std::variant<CirclePatrol, WaypointPaths>;

struct DynamicNetwork {
  std::vector<Vec2> initial_positions;
  ControllerParams controller;
};

struct FixedNetwork {
  std::vector<Vec2> positions;
};

using NetworkMode = std::variant<DynamicNetwork, FixedNetwork>;

struct ScenarioConfig {
  ChannelParams channel;
  std::vector<FlowSpec> flows;
  TaskTrajectory task_trajectory = CirclePatrol{};
  NetworkMode network_mode = FixedNetwork{};
  double agent_speed_limit = 2.0;  // m/s, network relays
  double dt = 1.0;                 // s
  double duration = 0.0;           // s
  std::uint64_t seed = 0;
  double r_min = 1e-4;
};

/// One simulation step's measurements. Per-source entries are ordered flow by
/// flow, sources in each flow's declared order.
struct MetricsRecord {
  double t = 0.0;
  std::vector<double> source_margin_mean;
  std::vector<double> source_margin_std;
  double avg_margin = 0.0;
  double slack = -kInfinity;
  double nu = -kInfinity;
  bool feasible = false;
  double supported_margin = 0.0;  // demand level actually supportable this step
  std::vector<Vec2> positions;    // all agents, task team first
  std::vector<Vec2> targets;      // controller targets (relay positions when fixed)
};

inline int num_task_agents(const TaskTrajectory& trajectory) {
  return std::visit(
      [](const auto& traj) -> int {
        using T = std::decay_t<decltype(traj)>;
        if constexpr (std::is_same_v<T, CirclePatrol>) {
          return static_cast<int>(traj.initial_phases.size());
        } else {
          return static_cast<int>(traj.paths.size());
        }
      },
      trajectory);
}

inline int num_network_agents(const NetworkMode& mode) {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DynamicNetwork>) {
          return static_cast<int>(m.initial_positions.size());
        } else {
          return static_cast<int>(m.positions.size());
        }
      },
      mode);
}

/// Task-team positions at absolute time t.
inline std::vector<Vec2> task_positions_at(const TaskTrajectory& trajectory,
                                           double default_speed, double t) {
  std::vector<Vec2> out;
  if (const auto* patrol = std::get_if<CirclePatrol>(&trajectory)) {
    out.reserve(patrol->initial_phases.size());
    for (double phase : patrol->initial_phases) {
      const double a = phase + patrol->angular_speed * t;
      out.push_back(patrol->center + patrol->radius * Vec2(std::cos(a), std::sin(a)));
    }
    return out;
  }
  const auto& wp = std::get<WaypointPaths>(trajectory);
  const double speed = wp.speed > 0.0 ? wp.speed : default_speed;
  for (const std::vector<Vec2>& path : wp.paths) {
    double remaining = speed * t;
    Vec2 pos = path.front();
    for (std::size_t seg = 0; seg + 1 < path.size() && remaining > 0.0; ++seg) {
      const Vec2 delta = path[seg + 1] - path[seg];
      const double len = delta.norm();
      if (remaining >= len) {
        remaining -= len;
        pos = path[seg + 1];
      } else {
        pos = path[seg] + (remaining / len) * delta;
        remaining = 0.0;
      }
    }
    out.push_back(pos);
  }
  return out;
}

enum class BaselinePattern { center, centered_triangle, pentagon_plus_center };

/// Canonical fixed relay placements used as static baselines: the patrol
/// center, an equilateral triangle, or a pentagon around an agent at the
/// center. Ring radius is radius_scale * patrol_radius.
inline std::vector<Vec2> fixed_baseline_positions(BaselinePattern pattern, double radius_scale,
                                                  const Vec2& center, double patrol_radius) {
  const double r = radius_scale * patrol_radius;
  auto ring = [&](int count) {
    std::vector<Vec2> pts;
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * i / count;
      pts.push_back(center + r * Vec2(std::cos(a), std::sin(a)));
    }
    return pts;
  };
  switch (pattern) {
    case BaselinePattern::center:
      return {center};
    case BaselinePattern::centered_triangle:
      return ring(3);
    case BaselinePattern::pentagon_plus_center: {
      std::vector<Vec2> pts = ring(5);
      pts.push_back(center);
      return pts;
    }
  }
  throw invalid_input("unknown baseline pattern");
}

inline void validate_scenario(const ScenarioConfig& cfg) {
  validate_channel(cfg.channel);
  detail::check_finite(cfg.dt, "dt");
  detail::check_finite(cfg.duration, "duration");
  detail::check_finite(cfg.agent_speed_limit, "agent_speed_limit");
  detail::check_finite(cfg.r_min, "r_min");
  if (cfg.dt <= 0.0) throw invalid_input("dt must be positive");
  if (cfg.duration < 0.0) throw invalid_input("duration must be nonnegative");
  if (cfg.agent_speed_limit <= 0.0) throw invalid_input("agent_speed_limit must be positive");
  if (cfg.r_min < 0.0) throw invalid_input("r_min must be nonnegative");

  if (const auto* patrol = std::get_if<CirclePatrol>(&cfg.task_trajectory)) {
    if (patrol->radius <= 0.0) throw invalid_input("patrol radius must be positive");
    detail::check_finite(patrol->angular_speed, "angular_speed");
    detail::check_finite(patrol->center.x(), "patrol center");
    detail::check_finite(patrol->center.y(), "patrol center");
    if (patrol->initial_phases.empty()) {
      throw invalid_input("patrol needs at least one task agent phase");
    }
    for (double phase : patrol->initial_phases) detail::check_finite(phase, "initial phase");
  } else {
    const auto& wp = std::get<WaypointPaths>(cfg.task_trajectory);
    if (wp.paths.empty()) throw invalid_input("waypoint trajectory needs at least one agent");
    for (const auto& path : wp.paths) {
      if (path.empty()) throw invalid_input("every waypoint path needs at least one vertex");
      for (const Vec2& v : path) {
        detail::check_finite(v.x(), "waypoint");
        detail::check_finite(v.y(), "waypoint");
      }
    }
    detail::check_finite(wp.speed, "waypoint speed");
    if (wp.speed < 0.0) throw invalid_input("waypoint speed must be nonnegative");
  }

  if (num_network_agents(cfg.network_mode) < 1) {
    throw invalid_input("at least one network agent is required");
  }
  if (const auto* dyn = std::get_if<DynamicNetwork>(&cfg.network_mode)) {
    if (dyn->controller.max_it < 1) throw invalid_input("controller max_it must be >= 1");
    if (!(dyn->controller.sample_stddev > 0.0)) {
      throw invalid_input("controller sample_stddev must be positive");
    }
    if (!(dyn->controller.collision_dist > 0.0)) {
      throw invalid_input("controller collision_dist must be positive");
    }
    for (const Vec2& v : dyn->initial_positions) {
      detail::check_finite(v.x(), "network position");
      detail::check_finite(v.y(), "network position");
    }
  } else {
    for (const Vec2& v : std::get<FixedNetwork>(cfg.network_mode).positions) {
      detail::check_finite(v.x(), "network position");
      detail::check_finite(v.y(), "network position");
    }
  }

  // Flow indices refer to task agents; check against the full team layout.
  const std::vector<Vec2> task0 =
      task_positions_at(cfg.task_trajectory, cfg.agent_speed_limit, 0.0);
  std::vector<Vec2> net0;
  if (const auto* dyn = std::get_if<DynamicNetwork>(&cfg.network_mode)) {
    net0 = dyn->initial_positions;
  } else {
    net0 = std::get<FixedNetwork>(cfg.network_mode).positions;
  }
  const TeamConfig team = detail::assemble_team(task0, net0);
  validate_team(team);
  validate_flows(team, cfg.flows);

  if (const auto* dyn = std::get_if<DynamicNetwork>(&cfg.network_mode)) {
    if (!detail::collision_free(team.positions, dyn->controller.collision_dist)) {
      throw invalid_input("initial configuration violates the collision distance");
    }
  }
}

/// Called after each recorded step with the record and the routing plan the
/// step actually used.
using StepCallback = std::function<void(int step, const MetricsRecord&, const RoutingVars&)>;

/// Runs the closed loop: advance the task team, route (and retarget, when
/// dynamic) at the current configuration, record metrics, then move relays
/// toward their targets under the speed limit. Infeasible steps report the
/// demand scale that bisection finds supportable. Deterministic per config.
inline std::vector<MetricsRecord> run_scenario(const ScenarioConfig& cfg,
                                               const StepCallback& callback = {}) {
  validate_scenario(cfg);

  const int steps = static_cast<int>(std::floor(cfg.duration / cfg.dt + 1e-9));
  std::vector<MetricsRecord> records;
  records.reserve(steps);

  const auto* dyn = std::get_if<DynamicNetwork>(&cfg.network_mode);
  std::vector<Vec2> net = dyn ? dyn->initial_positions
                              : std::get<FixedNetwork>(cfg.network_mode).positions;
  ControllerParams ctrl_params;
  ControllerState ctrl_state;
  if (dyn) {
    ctrl_params = dyn->controller;
    ctrl_state = ControllerState(ctrl_params);
  }

  const int num_flows = static_cast<int>(cfg.flows.size());

  for (int step = 0; step < steps; ++step) {
    const double t = step * cfg.dt;
    const std::vector<Vec2> task =
        task_positions_at(cfg.task_trajectory, cfg.agent_speed_limit, t);

    RoutingProblem problem;
    problem.team = detail::assemble_team(task, net);
    problem.rates = predict_rates(cfg.channel, problem.team.positions);
    problem.flows = cfg.flows;
    problem.r_min = cfg.r_min;

    MetricsRecord rec;
    rec.t = t;
    rec.positions = problem.team.positions;

    RoutingVars alpha(problem.team.size(), num_flows);
    if (dyn) {
      const ControllerStep ctrl =
          controller_step(ctrl_state, net, task, ctrl_params, cfg.channel, cfg.flows, cfg.r_min);
      if (ctrl.solver_failed) throw solver_failure("routing solve failed at t=" + std::to_string(t));
      alpha = ctrl.alpha;
      rec.feasible = ctrl.feasible;
      rec.slack = ctrl.slack;
      rec.targets = ctrl_state.target_config;
    } else {
      const RoutingSolution sol = solve_robust_routing(problem);
      if (sol.status == SolveStatus::numerical_failure) {
        throw solver_failure("routing solve failed at t=" + std::to_string(t));
      }
      alpha = sol.alpha;
      rec.feasible = sol.status == SolveStatus::optimal;
      rec.slack = sol.slack;
      rec.targets = net;
    }
    rec.nu = min_constraint_value(problem.team, cfg.flows, problem.rates, alpha);

    // Per-source margins come from the plan in use when the demands are met,
    // otherwise from a plan at the bisected feasibility boundary, which is
    // the level the team could actually sustain.
    RoutingVars measured = alpha;
    if (rec.feasible) {
      rec.supported_margin = cfg.flows.empty() ? 0.0 : cfg.flows.front().margin;
    } else {
      const double scale = boundary_margin_multiplier(problem);
      RoutingProblem scaled = problem;
      for (FlowSpec& f : scaled.flows) f.margin *= scale;
      SolveOptions options;
      options.nonneg_slack = false;
      const RoutingSolution boundary = solve_robust_routing(scaled, options);
      if (boundary.status != SolveStatus::optimal) {
        throw solver_failure("boundary solve failed at t=" + std::to_string(t));
      }
      measured = boundary.alpha;
      rec.supported_margin = cfg.flows.empty() ? 0.0 : scale * cfg.flows.front().margin;
    }
    double margin_sum = 0.0;
    int margin_count = 0;
    for (int k = 0; k < num_flows; ++k) {
      for (int src : cfg.flows[k].sources) {
        const MarginStats ms = margin_stats(measured, problem.rates, src, k);
        rec.source_margin_mean.push_back(ms.mean);
        rec.source_margin_std.push_back(std::sqrt(ms.var));
        margin_sum += ms.mean;
        ++margin_count;
      }
    }
    rec.avg_margin = margin_count > 0 ? margin_sum / margin_count : 0.0;

    if (callback) callback(step, rec, alpha);
    records.push_back(std::move(rec));

    // Relays move after the step's bookkeeping, taking effect next step.
    if (dyn) {
      const double reach = cfg.agent_speed_limit * cfg.dt;
      for (std::size_t r = 0; r < net.size(); ++r) {
        const Vec2 delta = ctrl_state.target_config[r] - net[r];
        const double dist = delta.norm();
        net[r] = dist <= reach ? ctrl_state.target_config[r] : Vec2(net[r] + (reach / dist) * delta);
      }
    }
  }

  return records;
}

}  // namespace relaynet

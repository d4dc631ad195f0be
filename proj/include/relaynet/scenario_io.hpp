#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relaynet/sim.hpp"

namespace relaynet {

using nlohmann::json;

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* name : allowed) ok = ok || key == name;
    if (!ok) throw invalid_input(where + ": unknown field '" + key + "'");
  }
}

inline const json& require_field(const json& obj, const char* name, const std::string& where) {
  const auto it = obj.find(name);
  if (it == obj.end()) throw invalid_input(where + ": missing required field '" + name + "'");
  return *it;
}

inline double get_number(const json& value, const std::string& where) {
  if (!value.is_number()) throw invalid_input(where + ": expected a number");
  return value.get<double>();
}

inline Vec2 parse_vec2(const json& value, const std::string& where) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
    throw invalid_input(where + ": expected [x, y]");
  }
  return {value[0].get<double>(), value[1].get<double>()};
}

inline std::vector<Vec2> parse_positions(const json& value, const std::string& where) {
  if (!value.is_array()) throw invalid_input(where + ": expected a list of [x, y] pairs");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    out.push_back(parse_vec2(value[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::vector<int> parse_indices(const json& value, const std::string& where) {
  if (!value.is_array()) throw invalid_input(where + ": expected a list of node indices");
  std::vector<int> out;
  for (const json& v : value) {
    if (!v.is_number_integer()) throw invalid_input(where + ": indices must be integers");
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace detail

inline ChannelParams parse_channel(const json& obj) {
  ChannelParams cp;
  if (obj.is_null()) return cp;
  detail::check_keys(obj,
                     {"transmit_power_dbm", "noise_floor_dbm", "path_loss_exponent", "var_scale",
                      "var_offset"},
                     "channel");
  if (obj.contains("transmit_power_dbm"))
    cp.transmit_power_dbm = detail::get_number(obj["transmit_power_dbm"], "channel.transmit_power_dbm");
  if (obj.contains("noise_floor_dbm"))
    cp.noise_floor_dbm = detail::get_number(obj["noise_floor_dbm"], "channel.noise_floor_dbm");
  if (obj.contains("path_loss_exponent"))
    cp.path_loss_exponent = detail::get_number(obj["path_loss_exponent"], "channel.path_loss_exponent");
  if (obj.contains("var_scale")) cp.var_scale = detail::get_number(obj["var_scale"], "channel.var_scale");
  if (obj.contains("var_offset")) cp.var_offset = detail::get_number(obj["var_offset"], "channel.var_offset");
  return cp;
}

inline json channel_to_json(const ChannelParams& cp) {
  return {{"transmit_power_dbm", cp.transmit_power_dbm},
          {"noise_floor_dbm", cp.noise_floor_dbm},
          {"path_loss_exponent", cp.path_loss_exponent},
          {"var_scale", cp.var_scale},
          {"var_offset", cp.var_offset}};
}

inline std::vector<FlowSpec> parse_flows(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw invalid_input("flows: expected a non-empty list");
  std::vector<FlowSpec> flows;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const json& f = arr[k];
    const std::string where = "flows[" + std::to_string(k) + "]";
    detail::check_keys(f, {"sources", "destinations", "margin", "confidence"}, where);
    FlowSpec flow;
    flow.sources = detail::parse_indices(detail::require_field(f, "sources", where), where + ".sources");
    flow.destinations =
        detail::parse_indices(detail::require_field(f, "destinations", where), where + ".destinations");
    if (f.contains("margin")) flow.margin = detail::get_number(f["margin"], where + ".margin");
    if (f.contains("confidence"))
      flow.confidence = detail::get_number(f["confidence"], where + ".confidence");
    flows.push_back(std::move(flow));
  }
  return flows;
}

inline json flows_to_json(const std::vector<FlowSpec>& flows) {
  json arr = json::array();
  for (const FlowSpec& f : flows) {
    arr.push_back({{"sources", f.sources},
                   {"destinations", f.destinations},
                   {"margin", f.margin},
                   {"confidence", f.confidence}});
  }
  return arr;
}

inline TaskTrajectory parse_task_trajectory(const json& obj) {
  detail::check_keys(obj, {"circle_patrol", "waypoints"}, "task_trajectory");
  if (obj.contains("circle_patrol") == obj.contains("waypoints")) {
    throw invalid_input("task_trajectory: give exactly one of 'circle_patrol' or 'waypoints'");
  }
  if (obj.contains("circle_patrol")) {
    const json& p = obj["circle_patrol"];
    detail::check_keys(p, {"radius", "center", "angular_speed", "initial_phases"},
                       "task_trajectory.circle_patrol");
    CirclePatrol patrol;
    patrol.radius = detail::get_number(detail::require_field(p, "radius", "circle_patrol"),
                                       "circle_patrol.radius");
    if (p.contains("center")) patrol.center = detail::parse_vec2(p["center"], "circle_patrol.center");
    if (p.contains("angular_speed"))
      patrol.angular_speed = detail::get_number(p["angular_speed"], "circle_patrol.angular_speed");
    const json& phases = detail::require_field(p, "initial_phases", "circle_patrol");
    if (!phases.is_array()) throw invalid_input("circle_patrol.initial_phases: expected a list");
    for (const json& v : phases) {
      patrol.initial_phases.push_back(detail::get_number(v, "circle_patrol.initial_phases"));
    }
    return patrol;
  }
  const json& w = obj["waypoints"];
  detail::check_keys(w, {"paths", "speed"}, "task_trajectory.waypoints");
  WaypointPaths wp;
  const json& paths = detail::require_field(w, "paths", "waypoints");
  if (!paths.is_array()) throw invalid_input("waypoints.paths: expected a list of paths");
  for (std::size_t i = 0; i < paths.size(); ++i) {
    wp.paths.push_back(
        detail::parse_positions(paths[i], "waypoints.paths[" + std::to_string(i) + "]"));
  }
  if (w.contains("speed")) wp.speed = detail::get_number(w["speed"], "waypoints.speed");
  return wp;
}

inline json task_trajectory_to_json(const TaskTrajectory& trajectory) {
  if (const auto* patrol = std::get_if<CirclePatrol>(&trajectory)) {
    return {{"circle_patrol",
             {{"radius", patrol->radius},
              {"center", {patrol->center.x(), patrol->center.y()}},
              {"angular_speed", patrol->angular_speed},
              {"initial_phases", patrol->initial_phases}}}};
  }
  const auto& wp = std::get<WaypointPaths>(trajectory);
  json paths = json::array();
  for (const auto& path : wp.paths) {
    json p = json::array();
    for (const Vec2& v : path) p.push_back({v.x(), v.y()});
    paths.push_back(std::move(p));
  }
  return {{"waypoints", {{"paths", std::move(paths)}, {"speed", wp.speed}}}};
}

inline BaselinePattern parse_baseline_pattern(const std::string& name) {
  if (name == "center") return BaselinePattern::center;
  if (name == "centered_triangle") return BaselinePattern::centered_triangle;
  if (name == "pentagon_plus_center") return BaselinePattern::pentagon_plus_center;
  throw invalid_input("fixed.pattern: unknown pattern '" + name +
                      "' (expected center, centered_triangle, or pentagon_plus_center)");
}

/// Parses the network-mode section. Fixed placements may be given either as
/// explicit positions or as a named baseline pattern laid out relative to the
/// circle patrol (which must then be the task trajectory).
inline NetworkMode parse_network_mode(const json& obj, const TaskTrajectory& trajectory,
                                      std::uint64_t scenario_seed) {
  detail::check_keys(obj, {"dynamic", "fixed"}, "network_mode");
  if (obj.contains("dynamic") == obj.contains("fixed")) {
    throw invalid_input("network_mode: give exactly one of 'dynamic' or 'fixed'");
  }
  if (obj.contains("dynamic")) {
    const json& d = obj["dynamic"];
    detail::check_keys(d, {"initial_positions", "controller"}, "network_mode.dynamic");
    DynamicNetwork dyn;
    dyn.initial_positions = detail::parse_positions(
        detail::require_field(d, "initial_positions", "dynamic"), "dynamic.initial_positions");
    dyn.controller.seed = scenario_seed;  // overridable below
    if (d.contains("controller")) {
      const json& c = d["controller"];
      detail::check_keys(c, {"max_it", "sample_stddev", "collision_dist", "seed"},
                         "dynamic.controller");
      if (c.contains("max_it")) {
        if (!c["max_it"].is_number_integer()) throw invalid_input("controller.max_it: expected an integer");
        dyn.controller.max_it = c["max_it"].get<int>();
      }
      if (c.contains("sample_stddev"))
        dyn.controller.sample_stddev = detail::get_number(c["sample_stddev"], "controller.sample_stddev");
      if (c.contains("collision_dist"))
        dyn.controller.collision_dist = detail::get_number(c["collision_dist"], "controller.collision_dist");
      if (c.contains("seed")) {
        if (!c["seed"].is_number_integer()) throw invalid_input("controller.seed: expected an integer");
        dyn.controller.seed = c["seed"].get<std::uint64_t>();
      }
    }
    return dyn;
  }
  const json& f = obj["fixed"];
  detail::check_keys(f, {"positions", "pattern", "radius_scale"}, "network_mode.fixed");
  FixedNetwork fixed;
  if (f.contains("positions") == f.contains("pattern")) {
    throw invalid_input("network_mode.fixed: give exactly one of 'positions' or 'pattern'");
  }
  if (f.contains("positions")) {
    fixed.positions = detail::parse_positions(f["positions"], "fixed.positions");
  } else {
    const auto* patrol = std::get_if<CirclePatrol>(&trajectory);
    if (!patrol) {
      throw invalid_input("network_mode.fixed: 'pattern' requires a circle_patrol task trajectory");
    }
    double scale = 0.5;
    if (f.contains("radius_scale")) scale = detail::get_number(f["radius_scale"], "fixed.radius_scale");
    fixed.positions = fixed_baseline_positions(parse_baseline_pattern(f["pattern"].get<std::string>()),
                                               scale, patrol->center, patrol->radius);
  }
  return fixed;
}

inline json network_mode_to_json(const NetworkMode& mode) {
  auto positions_json = [](const std::vector<Vec2>& positions) {
    json arr = json::array();
    for (const Vec2& v : positions) arr.push_back({v.x(), v.y()});
    return arr;
  };
  if (const auto* dyn = std::get_if<DynamicNetwork>(&mode)) {
    return {{"dynamic",
             {{"initial_positions", positions_json(dyn->initial_positions)},
              {"controller",
               {{"max_it", dyn->controller.max_it},
                {"sample_stddev", dyn->controller.sample_stddev},
                {"collision_dist", dyn->controller.collision_dist},
                {"seed", dyn->controller.seed}}}}}};
  }
  return {{"fixed", {{"positions", positions_json(std::get<FixedNetwork>(mode).positions)}}}};
}

/// Builds a ScenarioConfig from its JSON form. seed_override, when given,
/// replaces the scenario seed before the controller seed defaults from it.
inline ScenarioConfig parse_scenario(const json& root,
                                     std::optional<std::uint64_t> seed_override = {}) {
  if (!root.is_object()) throw invalid_input("scenario: expected a JSON object");
  detail::check_keys(root,
                     {"channel", "flows", "task_trajectory", "network_mode", "agent_speed_limit",
                      "dt", "duration", "seed", "r_min", "static"},
                     "scenario");

  ScenarioConfig cfg;
  if (root.contains("seed")) {
    if (!root["seed"].is_number_integer()) throw invalid_input("seed: expected an integer");
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  if (seed_override) cfg.seed = *seed_override;

  if (root.contains("channel")) cfg.channel = parse_channel(root["channel"]);
  cfg.flows = parse_flows(detail::require_field(root, "flows", "scenario"));
  cfg.task_trajectory =
      parse_task_trajectory(detail::require_field(root, "task_trajectory", "scenario"));
  cfg.network_mode =
      parse_network_mode(detail::require_field(root, "network_mode", "scenario"),
                         cfg.task_trajectory, cfg.seed);
  if (root.contains("agent_speed_limit"))
    cfg.agent_speed_limit = detail::get_number(root["agent_speed_limit"], "agent_speed_limit");
  if (root.contains("dt")) cfg.dt = detail::get_number(root["dt"], "dt");
  cfg.duration = detail::get_number(detail::require_field(root, "duration", "scenario"), "duration");
  if (root.contains("r_min")) cfg.r_min = detail::get_number(root["r_min"], "r_min");
  return cfg;
}

inline json scenario_to_json(const ScenarioConfig& cfg) {
  return {{"channel", channel_to_json(cfg.channel)},
          {"flows", flows_to_json(cfg.flows)},
          {"task_trajectory", task_trajectory_to_json(cfg.task_trajectory)},
          {"network_mode", network_mode_to_json(cfg.network_mode)},
          {"agent_speed_limit", cfg.agent_speed_limit},
          {"dt", cfg.dt},
          {"duration", cfg.duration},
          {"seed", cfg.seed},
          {"r_min", cfg.r_min}};
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw invalid_input("cannot open '" + path + "'");
  return json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
}

inline ScenarioConfig load_scenario_file(const std::string& path,
                                         std::optional<std::uint64_t> seed_override = {}) {
  return parse_scenario(load_json_file(path), seed_override);
}

/// A standalone routing instance: either the scenario's "static" section or
/// the full scenario evaluated at t = 0.
struct StaticProblem {
  ChannelParams channel;
  std::vector<FlowSpec> flows;
  std::vector<Vec2> task_positions;
  std::vector<Vec2> network_positions;
  double r_min = 1e-4;
};

inline StaticProblem load_static_problem(const json& root) {
  if (!root.is_object()) throw invalid_input("scenario: expected a JSON object");
  StaticProblem sp;
  if (root.contains("channel")) sp.channel = parse_channel(root["channel"]);
  sp.flows = parse_flows(detail::require_field(root, "flows", "scenario"));
  if (root.contains("r_min")) sp.r_min = detail::get_number(root["r_min"], "r_min");

  if (root.contains("static")) {
    const json& s = root["static"];
    detail::check_keys(s, {"task_positions", "network_positions"}, "static");
    sp.task_positions = detail::parse_positions(
        detail::require_field(s, "task_positions", "static"), "static.task_positions");
    if (s.contains("network_positions")) {
      sp.network_positions =
          detail::parse_positions(s["network_positions"], "static.network_positions");
    }
    return sp;
  }

  // No static section: take the scenario's configuration at time zero.
  const ScenarioConfig cfg = parse_scenario(root);
  sp.task_positions = task_positions_at(cfg.task_trajectory, cfg.agent_speed_limit, 0.0);
  if (const auto* dyn = std::get_if<DynamicNetwork>(&cfg.network_mode)) {
    sp.network_positions = dyn->initial_positions;
  } else {
    sp.network_positions = std::get<FixedNetwork>(cfg.network_mode).positions;
  }
  return sp;
}

/// Shortest decimal form that parses back to the same double; infinities
/// print as inf / -inf.
inline std::string format_double(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

inline constexpr const char* kMetricsFormatLine = "# relaynet-metrics v1";

/// Column layout: time, per-source margin statistics flow by flow, aggregate
/// quality numbers, then every agent position.
inline void write_metrics_header(std::ostream& os, const std::vector<FlowSpec>& flows,
                                 int num_agents) {
  os << kMetricsFormatLine << '\n';
  os << 't';
  for (std::size_t k = 0; k < flows.size(); ++k) {
    for (int src : flows[k].sources) {
      os << ",bbar_f" << k << "_n" << src << ",bstd_f" << k << "_n" << src;
    }
  }
  os << ",avg_margin,slack,nu,feasible,supported_margin";
  for (int i = 0; i < num_agents; ++i) os << ",x" << i << ",y" << i;
  os << '\n';
}

inline void write_metrics_row(std::ostream& os, const MetricsRecord& rec) {
  os << format_double(rec.t);
  for (std::size_t s = 0; s < rec.source_margin_mean.size(); ++s) {
    os << ',' << format_double(rec.source_margin_mean[s]) << ','
       << format_double(rec.source_margin_std[s]);
  }
  os << ',' << format_double(rec.avg_margin) << ',' << format_double(rec.slack) << ','
     << format_double(rec.nu) << ',' << (rec.feasible ? 1 : 0) << ','
     << format_double(rec.supported_margin);
  for (const Vec2& v : rec.positions) {
    os << ',' << format_double(v.x()) << ',' << format_double(v.y());
  }
  os << '\n';
}

/// Dense JSON form of a routing plan with the dimensions spelled out;
/// values[i][j][k] mirrors alpha(i, j, k).
inline json alpha_to_json(const RoutingVars& alpha) {
  json values = json::array();
  for (int i = 0; i < alpha.num_nodes(); ++i) {
    json per_i = json::array();
    for (int j = 0; j < alpha.num_nodes(); ++j) {
      json per_j = json::array();
      for (int k = 0; k < alpha.num_flows(); ++k) per_j.push_back(alpha(i, j, k));
      per_i.push_back(std::move(per_j));
    }
    values.push_back(std::move(per_i));
  }
  return {{"n", alpha.num_nodes()}, {"num_flows", alpha.num_flows()}, {"values", std::move(values)}};
}

inline RoutingVars alpha_from_json(const json& obj) {
  const int n = obj.at("n").get<int>();
  const int num_flows = obj.at("num_flows").get<int>();
  RoutingVars alpha(n, num_flows);
  const json& values = obj.at("values");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < num_flows; ++k) alpha(i, j, k) = values[i][j][k].get<double>();
  return alpha;
}

/// Numbers that may legitimately be infinite are stored as strings then.
inline json finite_or_string(double value) {
  if (std::isfinite(value)) return value;
  return value > 0 ? "inf" : "-inf";
}

inline json snapshot_json(int step, const MetricsRecord& rec, const RoutingVars& alpha,
                          int num_task_agents) {
  json positions = json::array();
  for (const Vec2& v : rec.positions) positions.push_back({v.x(), v.y()});
  json targets = json::array();
  for (const Vec2& v : rec.targets) targets.push_back({v.x(), v.y()});
  std::vector<int> task_idx, network_idx;
  for (int i = 0; i < static_cast<int>(rec.positions.size()); ++i) {
    (i < num_task_agents ? task_idx : network_idx).push_back(i);
  }
  return {{"step", step},
          {"t", rec.t},
          {"positions", std::move(positions)},
          {"task_idx", task_idx},
          {"network_idx", network_idx},
          {"targets", std::move(targets)},
          {"alpha", alpha_to_json(alpha)},
          {"slack", finite_or_string(rec.slack)},
          {"nu", finite_or_string(rec.nu)},
          {"feasible", rec.feasible},
          {"supported_margin", rec.supported_margin}};
}

}  // namespace relaynet

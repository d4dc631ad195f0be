#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "relaynet/core.hpp"

namespace relaynet {

/// A team of agents: task agents generate/consume traffic along exogenous
/// trajectories; network agents are controllable relays.
struct TeamConfig {
  std::vector<Vec2> positions;   // all agents, task and network
  std::vector<int> task_idx;     // indices into positions
  std::vector<int> network_idx;  // indices into positions, disjoint from task_idx

  int size() const { return static_cast<int>(positions.size()); }
};

/// One traffic demand: every source must deliver margin `margin` to the flow,
/// guaranteed with probability `confidence`.
struct FlowSpec {
  std::vector<int> sources;
  std::vector<int> destinations;
  double margin = 0.0;
  double confidence = 0.7;
};

inline bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

inline void validate_team(const TeamConfig& team) {
  const int n = team.size();
  if (n == 0) throw invalid_input("team has no agents");
  for (const Vec2& p : team.positions) {
    detail::check_finite(p.x(), "position.x");
    detail::check_finite(p.y(), "position.y");
  }
  std::vector<char> seen(n, 0);
  auto mark = [&](const std::vector<int>& idx, const char* what) {
    for (int i : idx) {
      if (i < 0 || i >= n) {
        throw invalid_input(std::string(what) + " index " + std::to_string(i) + " out of range");
      }
      if (seen[i]) {
        throw invalid_input("agent " + std::to_string(i) + " assigned to both teams or repeated");
      }
      seen[i] = 1;
    }
  };
  mark(team.task_idx, "task");
  mark(team.network_idx, "network");
  if (!std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; })) {
    throw invalid_input("every agent must belong to either the task or the network team");
  }
}

inline void validate_flows(const TeamConfig& team, const std::vector<FlowSpec>& flows) {
  if (flows.empty()) throw invalid_input("at least one flow is required");
  for (std::size_t k = 0; k < flows.size(); ++k) {
    const FlowSpec& f = flows[k];
    const std::string tag = "flow " + std::to_string(k);
    if (f.sources.empty()) throw invalid_input(tag + ": sources must be non-empty");
    if (f.destinations.empty()) throw invalid_input(tag + ": destinations must be non-empty");
    for (int i : f.sources) {
      if (!contains(team.task_idx, i)) {
        throw invalid_input(tag + ": source " + std::to_string(i) + " is not a task agent");
      }
      if (contains(f.destinations, i)) {
        throw invalid_input(tag + ": node " + std::to_string(i) + " is both source and destination");
      }
    }
    for (int j : f.destinations) {
      if (!contains(team.task_idx, j)) {
        throw invalid_input(tag + ": destination " + std::to_string(j) + " is not a task agent");
      }
    }
    detail::check_finite(f.margin, "margin");
    if (f.margin < 0.0) throw invalid_input(tag + ": margin must be >= 0");
    if (!(f.confidence > 0.5 && f.confidence < 1.0)) {
      throw invalid_input(tag + ": confidence must lie in (0.5, 1), got " +
                          std::to_string(f.confidence));
    }
  }
}

/// Demanded margin for node i in flow k: sources demand the flow margin,
/// everyone else (relays) demands zero.
inline double node_margin(const FlowSpec& flow, int i) {
  return contains(flow.sources, i) ? flow.margin : 0.0;
}

}  // namespace relaynet

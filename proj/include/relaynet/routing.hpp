#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "relaynet/channel.hpp"
#include "relaynet/core.hpp"
#include "relaynet/team.hpp"

namespace relaynet {

/// Dense routing tensor: alpha(i, j, k) is the fraction of node i's airtime
/// spent forwarding flow k's traffic to node j. All entries lie in [0, 1].
class RoutingVars {
 public:
  RoutingVars() = default;
  RoutingVars(int num_nodes, int num_flows)
      : n_(num_nodes),
        k_(num_flows),
        data_(static_cast<std::size_t>(num_nodes) * num_nodes * num_flows, 0.0) {}

  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }

  int num_nodes() const { return n_; }
  int num_flows() const { return k_; }
  const std::vector<double>& data() const { return data_; }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

 private:
  std::size_t index(int i, int j, int k) const {
    if (i < 0 || i >= n_ || j < 0 || j >= n_ || k < 0 || k >= k_) {
      throw invalid_input("routing index out of range");
    }
    return (static_cast<std::size_t>(k) * n_ + i) * n_ + j;
  }

  int n_ = 0;
  int k_ = 0;
  std::vector<double> data_;
};

struct MarginStats {
  double mean = 0.0;
  double var = 0.0;
};

/// Rate margin statistics for node i under flow k: mean outflow minus mean
/// inflow, and the variance both directions contribute.
inline MarginStats margin_stats(const RoutingVars& alpha, const RateTable& rates, int i, int k) {
  const int n = alpha.num_nodes();
  if (rates.size() != n) throw invalid_input("rate table size does not match routing vars");
  if (i < 0 || i >= n || k < 0 || k >= alpha.num_flows()) {
    throw invalid_input("margin_stats index out of range");
  }
  MarginStats out;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const double a_out = alpha(i, j, k);
    const double a_in = alpha(j, i, k);
    out.mean += a_out * rates.mean(i, j) - a_in * rates.mean(j, i);
    out.var += a_out * a_out * rates.var(i, j) + a_in * a_in * rates.var(j, i);
  }
  return out;
}

/// Worst normalized constraint residual over all constrained (node, flow)
/// pairs: min of (mean margin - demanded margin)/sqrt(var) - probit(confidence).
/// Constrained pairs are each flow's sources plus every network agent.
/// Zero-variance pairs contribute +inf when the mean meets the demand and
/// -inf otherwise; the min of no pairs is +inf.
inline double min_constraint_value(const TeamConfig& team, const std::vector<FlowSpec>& flows,
                                   const RateTable& rates, const RoutingVars& alpha) {
  double nu = kInfinity;
  for (int k = 0; k < static_cast<int>(flows.size()); ++k) {
    const FlowSpec& flow = flows[k];
    const double z = probit(flow.confidence);
    for (int i = 0; i < team.size(); ++i) {
      const bool is_source = contains(flow.sources, i);
      if (!is_source && !contains(team.network_idx, i)) continue;
      const MarginStats stats = margin_stats(alpha, rates, i, k);
      const double excess = stats.mean - node_margin(flow, i);
      double value;
      if (stats.var <= 0.0) {
        value = excess >= 0.0 ? kInfinity : -kInfinity;
      } else {
        value = excess / std::sqrt(stats.var) - z;
      }
      nu = std::min(nu, value);
    }
  }
  return nu;
}

/// Next hop for (node, flow) drawn with probability proportional to the
/// alpha row; -1 when the row is all zero (in which case no randomness is
/// consumed, keeping the stream position predictable).
inline int sample_next_hop(const RoutingVars& alpha, int i, int k, Rng& rng) {
  const int n = alpha.num_nodes();
  double row_sum = 0.0;
  for (int j = 0; j < n; ++j) row_sum += alpha(i, j, k);
  if (row_sum <= 0.0) return -1;

  const double u = rng.uniform01() * row_sum;
  double acc = 0.0;
  int last_nonzero = -1;
  for (int j = 0; j < n; ++j) {
    const double a = alpha(i, j, k);
    if (a <= 0.0) continue;
    acc += a;
    last_nonzero = j;
    if (u < acc) return j;
  }
  return last_nonzero;  // guards the u == row_sum rounding edge
}

/// A fixed routing table sampled from alpha: entry [i][k] is the next hop for
/// flow k's traffic at node i, or -1 for nodes that do not forward that flow.
inline std::vector<std::vector<int>> sample_routing_table(const RoutingVars& alpha, Rng& rng) {
  std::vector<std::vector<int>> table(alpha.num_nodes(),
                                      std::vector<int>(alpha.num_flows(), -1));
  for (int i = 0; i < alpha.num_nodes(); ++i) {
    for (int k = 0; k < alpha.num_flows(); ++k) {
      table[i][k] = sample_next_hop(alpha, i, k, rng);
    }
  }
  return table;
}

}  // namespace relaynet

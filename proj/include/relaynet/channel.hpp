#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "relaynet/core.hpp"

namespace relaynet {

/// Log-distance path-loss channel with a saturating rate curve.
///
/// The expected normalized rate over a link of length d is
///   mean(d) = erf(sqrt(SNR(d))),   SNR(d) = 10^((P_tx - P_noise)/10) * d^-n,
/// and the rate variance grows with distance as
///   var(d) = var_scale * d / (var_offset + d).
struct ChannelParams {
  double transmit_power_dbm = -53.0;
  double noise_floor_dbm = -70.0;
  double path_loss_exponent = 2.52;
  double var_scale = 0.2;
  double var_offset = 0.6;
};

struct LinkStats {
  double mean = 0.0;
  double var = 0.0;
};

/// Pairwise link statistics for a team; zero diagonal (no self links).
struct RateTable {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd var;

  int size() const { return static_cast<int>(mean.rows()); }
};

inline void validate_channel(const ChannelParams& cp) {
  detail::check_finite(cp.transmit_power_dbm, "transmit_power_dbm");
  detail::check_finite(cp.noise_floor_dbm, "noise_floor_dbm");
  detail::check_finite(cp.path_loss_exponent, "path_loss_exponent");
  detail::check_finite(cp.var_scale, "var_scale");
  detail::check_finite(cp.var_offset, "var_offset");
  if (cp.var_scale < 0.0) throw invalid_input("var_scale must be >= 0");
  if (cp.var_offset <= 0.0) throw invalid_input("var_offset must be > 0");
}

/// Predicted rate statistics for a link of the given length (meters).
inline LinkStats predict_link(const ChannelParams& cp, double distance) {
  validate_channel(cp);
  detail::check_finite(distance, "distance");
  if (distance < 0.0) throw invalid_input("distance must be >= 0");
  if (distance == 0.0) return {1.0, 0.0};

  const double snr = std::pow(10.0, (cp.transmit_power_dbm - cp.noise_floor_dbm) / 10.0) *
                     std::pow(distance, -cp.path_loss_exponent);
  return {std::erf(std::sqrt(snr)), cp.var_scale * distance / (cp.var_offset + distance)};
}

/// Full pairwise table for a set of positions. Symmetric with zero diagonal.
inline RateTable predict_rates(const ChannelParams& cp, const std::vector<Vec2>& positions) {
  validate_channel(cp);
  const int n = static_cast<int>(positions.size());
  for (const Vec2& p : positions) {
    detail::check_finite(p.x(), "position.x");
    detail::check_finite(p.y(), "position.y");
  }

  RateTable table;
  table.mean = Eigen::MatrixXd::Zero(n, n);
  table.var = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const LinkStats link = predict_link(cp, (positions[i] - positions[j]).norm());
      table.mean(i, j) = table.mean(j, i) = link.mean;
      table.var(i, j) = table.var(j, i) = link.var;
    }
  }
  return table;
}

}  // namespace relaynet

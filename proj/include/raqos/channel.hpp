#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "raqos/rng.hpp"

namespace raqos {

// Large-scale propagation and cell geometry.
struct ChannelParams {
  double cell_radius_m = 200.0;
  double pathloss_intercept_db = 35.3;
  double pathloss_slope_db = 37.6;  // dB per decade of distance
  double shadowing_sigma_db = 8.0;
  int n_antennas = 64;
  std::uint64_t rng_seed = 1;

  void validate() const;  // throws std::invalid_argument
};

// Small-scale power gains, one row per user, one column per realization.
// Gains on different subcarriers of one user are i.i.d., so a consumer that
// needs an m-subcarrier realization reads m consecutive columns.
struct ChannelDraw {
  int n_users = 0;
  int n_cols = 0;
  std::vector<double> g;  // row-major

  std::span<const double> row(int user) const;
};

double pathloss_db(double distance_m, const ChannelParams& params);

// Linear power gain 10^-(PL(d)+S)/10 with S ~ Normal(0, sigma_db).
double large_scale_gain(double distance_m, const ChannelParams& params, RngStream& rng);

// Gains drawn from Gamma(n_antennas, 1): the post-MRT fading power with
// n_antennas transmit antennas and Rayleigh paths.
ChannelDraw sample_small_scale(int n_users, int n_draws, int n_antennas, RngStream& rng);

// Area-uniform user placement; returns BS-user distances.
std::vector<double> place_users_uniform_disk(int n_users, double radius_m, RngStream& rng);

}  // namespace raqos

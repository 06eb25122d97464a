#include "raqos/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace raqos {

void ChannelParams::validate() const {
  if (!(cell_radius_m > 0.0)) throw std::invalid_argument("cell_radius must be positive");
  if (shadowing_sigma_db < 0.0) throw std::invalid_argument("shadowing sigma must be >= 0");
  if (n_antennas < 1) throw std::invalid_argument("antenna count must be >= 1");
}

std::span<const double> ChannelDraw::row(int user) const {
  if (user < 0 || user >= n_users) throw std::out_of_range("ChannelDraw::row");
  return {g.data() + static_cast<std::size_t>(user) * n_cols, static_cast<std::size_t>(n_cols)};
}

double pathloss_db(double distance_m, const ChannelParams& params) {
  if (!(distance_m > 0.0)) throw std::invalid_argument("distance must be positive");
  return params.pathloss_intercept_db + params.pathloss_slope_db * std::log10(distance_m);
}

double large_scale_gain(double distance_m, const ChannelParams& params, RngStream& rng) {
  if (!(distance_m > 0.0) || distance_m > params.cell_radius_m)
    throw std::invalid_argument("distance must be in (0, cell_radius]");
  // Shadowing applied in the dB domain with zero mean, then converted.
  double shadow_db = params.shadowing_sigma_db * rng.normal();
  double loss_db = pathloss_db(distance_m, params) + shadow_db;
  return std::pow(10.0, -loss_db / 10.0);
}

ChannelDraw sample_small_scale(int n_users, int n_draws, int n_antennas, RngStream& rng) {
  if (n_users < 1 || n_draws < 1) throw std::invalid_argument("user and draw counts must be >= 1");
  if (n_antennas < 1) throw std::invalid_argument("antenna count must be >= 1");
  ChannelDraw d;
  d.n_users = n_users;
  d.n_cols = n_draws;
  d.g.resize(static_cast<std::size_t>(n_users) * n_draws);
  for (int u = 0; u < n_users; ++u) {
    RngStream s = rng.fork(u);
    double* row = d.g.data() + static_cast<std::size_t>(u) * n_draws;
    for (int j = 0; j < n_draws; ++j) row[j] = s.gamma(static_cast<double>(n_antennas));
  }
  return d;
}

std::vector<double> place_users_uniform_disk(int n_users, double radius_m, RngStream& rng) {
  if (n_users < 0) throw std::invalid_argument("user count must be >= 0");
  if (!(radius_m > 0.0)) throw std::invalid_argument("radius must be positive");
  std::vector<double> d(n_users);
  for (int u = 0; u < n_users; ++u) d[u] = radius_m * std::sqrt(rng.uniform());
  return d;
}

}  // namespace raqos

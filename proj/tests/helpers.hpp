#pragma once

#include "raqos/allocator.hpp"
#include "raqos/dataset.hpp"
#include "raqos/qos.hpp"

namespace testutil {

// Small frozen-gain dataset spec: labels are deterministic and cheap, so
// dataset-dependent tests stay fast.
inline raqos::GenSpec frozen_genspec(const raqos::ScenarioTemplate& tmpl, int count,
                                     std::uint64_t seed, int n_max = 12) {
  raqos::GenSpec g;
  g.cfg.n_max = n_max;
  g.cfg.p_ca_w = 0.05 / n_max;
  g.chan.rng_seed = seed;
  g.tmpl = tmpl;
  g.count = count;
  g.seed = seed;
  g.frozen_gain = true;
  g.label_draws = 1;
  g.threads = 1;
  return g;
}

// Desk-scale system: Table-style radio constants with a small subcarrier
// budget so oracles stay enumerable.
inline raqos::SystemConfig desk_cfg(int n_max = 32, int n_antennas = 64) {
  raqos::SystemConfig c;
  c.n_max = n_max;
  c.n_antennas = n_antennas;
  c.p_ca_w = 0.05 / n_max;
  return c;
}

inline raqos::UserSpec tolerant_user(double alpha, double rate_bps) {
  raqos::UserSpec u;
  u.service = raqos::Service::tolerant;
  u.alpha = alpha;
  u.traffic = raqos::TolerantTraffic{rate_bps};
  return u;
}

inline raqos::UserSpec sensitive_user(double alpha, double arrival_pps, double packet_bits,
                                      double delay_s = 0.05, double eps = 1e-2) {
  raqos::UserSpec u;
  u.service = raqos::Service::sensitive;
  u.alpha = alpha;
  u.traffic = raqos::SensitiveTraffic{arrival_pps, 1.0 / packet_bits, delay_s, eps};
  return u;
}

inline raqos::UserSpec urllc_user(double alpha, double packet_bits, double eps = 5e-8) {
  raqos::UserSpec u;
  u.service = raqos::Service::urllc;
  u.alpha = alpha;
  u.traffic = raqos::UrllcTraffic{packet_bits, eps};
  return u;
}

}  // namespace testutil

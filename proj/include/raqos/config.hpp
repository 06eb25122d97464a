#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "raqos/dataset.hpp"
#include "raqos/solver.hpp"

namespace raqos {

double dbm_to_w(double dbm);
double w_to_dbm(double w);

// Flat run configuration mirroring the simulation parameter tables. Values
// are entered in the units the tables use (dBm, ms, kHz, bytes, KB/s) and
// converted to SI at the accessors.
struct RunConfig {
  // BS and radio
  double p_max_dbm = 46.0;
  double tti_ms = 0.125;
  double subcarrier_bw_khz = 120.0;
  double coherence_ms = 5.0;
  double noise_dbm_hz = -174.0;
  int n_antennas = 64;
  int n_max = 256;
  double circuit_power_per_antenna_mw = 50.0;  // the N_max * P_ca product
  double p_ca_override_mw = -1.0;              // direct P_ca when >= 0
  double fixed_circuit_power_mw = 50.0;
  double amp_efficiency = 0.5;
  double snr_gap = 2.0;

  // cell
  double cell_radius_m = 200.0;
  double pathloss_intercept_db = 35.3;
  double pathloss_slope_db = 37.6;
  double shadowing_sigma_db = 8.0;

  // traffic
  int urllc_packet_bytes_min = 20, urllc_packet_bytes_max = 64;
  double urllc_error_bound = 5e-8;
  double tolerant_rate_kbytes_min = 50.0, tolerant_rate_kbytes_max = 100.0;
  double sens_arrival_pps_min = 100.0, sens_arrival_pps_max = 1000.0;
  double sens_packet_kbits_min = 1.0, sens_packet_kbits_max = 20.0;
  double sens_delay_bound_ms = 50.0;
  double sens_violation_prob = 1e-2;

  // scenario
  int users_total = 6;
  std::string service_ratio = "1:1:1";
  std::uint64_t seed = 1;

  // solver
  double solver_step_scale = 1.5;
  int solver_max_iters = 4000;
  int solver_draws_per_iter = 256;
  double solver_residual_tol = 1e-3;
  double solver_urllc_residual_tol = 0.05;
  int solver_window = 50;
  int oracle_draws = 100000;
  int label_draws = 1000;
  double bisect_rel_width = 1e-6;

  // neural nets
  std::string phi1_hidden = "64,64";
  std::string phi2_hidden = "20,20,20,20";
  std::string fnn_hidden = "96,96,96";
  int batch_size = 128;
  double learning_rate = 1e-3;
  int epochs = 4000;
  std::string init = "he";
  std::uint64_t train_seed = 7;

  int threads = 0;

  std::set<std::string> explicit_keys;  // keys present in the parsed document

  SystemConfig to_system_config() const;
  ChannelParams to_channel_params() const;
  TrafficRanges to_ranges() const;
  SolverConfig to_solver_config() const;
  TrainConfig to_train_config() const;
  ScenarioTemplate to_template() const;

  std::string to_string() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

std::vector<int> parse_hidden(const std::string& csv);

}  // namespace raqos

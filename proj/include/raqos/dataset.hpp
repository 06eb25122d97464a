#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "raqos/allocator.hpp"
#include "raqos/channel.hpp"
#include "raqos/neural.hpp"

namespace raqos {

// Table-style parameter ranges the users are drawn from. Units are SI here;
// the config layer owns the bytes/KB/dBm conversions.
struct TrafficRanges {
  double tolerant_rate_bps_min = 400e3, tolerant_rate_bps_max = 800e3;  // 50..100 KB/s
  double sens_arrival_pps_min = 100.0, sens_arrival_pps_max = 1000.0;
  double sens_packet_bits_min = 1000.0, sens_packet_bits_max = 20000.0;  // 1..20 kbit
  double sens_delay_bound_s = 0.05;
  double sens_violation_prob = 1e-2;
  double urllc_packet_bits_min = 160.0, urllc_packet_bits_max = 512.0;  // 20..64 bytes
  double urllc_error_bound = 5e-8;
};

struct GenSpec {
  SystemConfig cfg;
  ChannelParams chan;
  ScenarioTemplate tmpl;
  TrafficRanges ranges;
  int count = 0;
  std::uint64_t seed = 1;
  int label_draws = 1000;   // frozen Monte Carlo depth behind each label solve
  double bisect_rel_width = 1e-6;
  bool frozen_gain = false;  // deterministic channel pinned at the mean gain
  int threads = 0;           // 0: hardware concurrency
};

struct DatasetRecord {
  int index = 0;
  std::uint64_t seed = 0;
  std::vector<UserSpec> users;
  std::vector<double> distance_m;
  TrainingSample sample;            // x = [alpha_dB per slot, c per slot]
  bool feasible = false;
  double opt_total_w = 0.0;
  // Required transmit power per user over n = 1..n_cap, from the same frozen
  // draws as the labels, so the label pair (n*, p*) lies on its own curve.
  std::vector<std::vector<double>> p_req_w;
};

struct DatasetHeader {
  int schema = 1;
  std::uint64_t seed = 1;
  int count = 0;
  ScenarioTemplate tmpl;
  SystemConfig cfg;
  ChannelParams chan;
  TrafficRanges ranges;
  int label_draws = 1000;
  int n_cap = 0;
  bool frozen_gain = false;
  std::string cfg_digest;
};

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;

  std::vector<TrainingSample> training_samples(bool feasible_only = true) const;
  // First 90% of records train, the last 10% test, skipping infeasible ones.
  std::pair<std::vector<int>, std::vector<int>> split_indices() const;
};

// Digest of the physical configuration a dataset or model was built under;
// evaluating across different digests is refused unless forced.
std::string system_digest(const SystemConfig& cfg, const ChannelParams& chan);

// Feature encoding of the large-scale gain.
double alpha_feature(double alpha_linear);

DatasetRecord generate_record(const GenSpec& spec, int index);
Dataset generate_dataset(const GenSpec& spec);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

ScenarioTemplate ratio_template(int width, int t_parts, int s_parts, int u_parts);

}  // namespace raqos

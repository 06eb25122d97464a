#include "raqos/dataset.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace raqos {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string system_digest(const SystemConfig& cfg, const ChannelParams& chan) {
  std::ostringstream os;
  os << "W=" << fmt17(cfg.subcarrier_bw_hz) << ";Ts=" << fmt17(cfg.tti_s)
     << ";Tc=" << fmt17(cfg.coherence_s) << ";NT=" << cfg.n_antennas
     << ";N0=" << fmt17(cfg.noise_w_hz) << ";Phi=" << fmt17(cfg.snr_gap)
     << ";rho=" << fmt17(cfg.amp_efficiency) << ";Pca=" << fmt17(cfg.p_ca_w)
     << ";P0c=" << fmt17(cfg.p0_circuit_w) << ";Nmax=" << cfg.n_max
     << ";Pmax=" << fmt17(cfg.p_max_w) << ";R=" << fmt17(chan.cell_radius_m)
     << ";PL0=" << fmt17(chan.pathloss_intercept_db)
     << ";PLs=" << fmt17(chan.pathloss_slope_db)
     << ";sh=" << fmt17(chan.shadowing_sigma_db);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(os.str())));
  return buf;
}

double alpha_feature(double alpha_linear) {
  if (!(alpha_linear > 0.0)) throw std::invalid_argument("alpha must be positive");
  return 10.0 * std::log10(alpha_linear);
}

ScenarioTemplate ratio_template(int width, int t_parts, int s_parts, int u_parts) {
  if (width < 1 || t_parts < 0 || s_parts < 0 || u_parts < 0 || t_parts + s_parts + u_parts == 0)
    throw std::invalid_argument("bad service ratio");
  int total = t_parts + s_parts + u_parts;
  int nt = width * t_parts / total;
  int ns = width * s_parts / total;
  int nu = width * u_parts / total;
  int leftover = width - nt - ns - nu;
  // Remainders go to the first types in order.
  while (leftover > 0) {
    if (t_parts > 0 && leftover > 0) { ++nt; --leftover; }
    if (s_parts > 0 && leftover > 0) { ++ns; --leftover; }
    if (u_parts > 0 && leftover > 0) { ++nu; --leftover; }
  }
  ScenarioTemplate tmpl;
  for (int i = 0; i < nt; ++i) tmpl.slots.push_back(Service::tolerant);
  for (int i = 0; i < ns; ++i) tmpl.slots.push_back(Service::sensitive);
  for (int i = 0; i < nu; ++i) tmpl.slots.push_back(Service::urllc);
  return tmpl;
}

DatasetRecord generate_record(const GenSpec& spec, int index) {
  DatasetRecord rec;
  rec.index = index;
  RngStream rng = RngStream(spec.seed).fork(static_cast<std::uint64_t>(index));
  rec.seed = rng.seed();

  const int K = spec.tmpl.width();
  rec.users.reserve(K);
  rec.distance_m.reserve(K);
  for (int k = 0; k < K; ++k) {
    double d = spec.chan.cell_radius_m * std::sqrt(rng.uniform());
    double alpha = large_scale_gain(d, spec.chan, rng);
    UserSpec u;
    u.alpha = alpha;
    u.service = spec.tmpl.slots[k];
    const TrafficRanges& tr = spec.ranges;
    switch (u.service) {
      case Service::tolerant: {
        double rate = tr.tolerant_rate_bps_min +
                      (tr.tolerant_rate_bps_max - tr.tolerant_rate_bps_min) * rng.uniform();
        u.traffic = TolerantTraffic{rate};
        break;
      }
      case Service::sensitive: {
        double nu_a = tr.sens_arrival_pps_min +
                      (tr.sens_arrival_pps_max - tr.sens_arrival_pps_min) * rng.uniform();
        double bits = tr.sens_packet_bits_min +
                      (tr.sens_packet_bits_max - tr.sens_packet_bits_min) * rng.uniform();
        u.traffic = SensitiveTraffic{nu_a, 1.0 / bits, tr.sens_delay_bound_s,
                                     tr.sens_violation_prob};
        break;
      }
      case Service::urllc: {
        int bytes_lo = static_cast<int>(tr.urllc_packet_bits_min / 8.0);
        int bytes_hi = static_cast<int>(tr.urllc_packet_bits_max / 8.0);
        int bytes = bytes_lo + static_cast<int>(rng.uniform_int(
                                   static_cast<std::uint32_t>(bytes_hi - bytes_lo + 1)));
        u.traffic = UrllcTraffic{8.0 * bytes, tr.urllc_error_bound};
        break;
      }
    }
    rec.users.push_back(u);
    rec.distance_m.push_back(d);
  }

  rec.sample.x.resize(2 * K);
  for (int k = 0; k < K; ++k) {
    rec.sample.x[k] = alpha_feature(rec.users[k].alpha);
    rec.sample.x[K + k] = rec.users[k].feature();
  }

  Scenario scn{rec.users, spec.cfg};
  std::optional<std::vector<double>> frozen;
  if (spec.frozen_gain)
    frozen = std::vector<double>(K, static_cast<double>(spec.cfg.n_antennas));
  PowerCache cache(scn, spec.frozen_gain ? 1 : spec.label_draws, rng.next_u64(), frozen,
                   spec.bisect_rel_width);
  AllocationResult res = greedy_min_total(scn, cache);

  rec.sample.n_star = res.alloc.n;
  rec.sample.p_star = res.alloc.p;
  rec.feasible = res.feasible;
  rec.opt_total_w = res.total_power_w;

  rec.p_req_w.assign(K, {});
  for (int k = 0; k < K; ++k) {
    if (!rec.users[k].active()) continue;
    rec.p_req_w[k].reserve(spec.cfg.n_max);
    // Requirements are clamped at the transmit budget: beyond it the user is
    // unservable at that bandwidth and the budget is the honest charge.
    for (int n = 1; n <= spec.cfg.n_max; ++n)
      rec.p_req_w[k].push_back(std::min(cache.power(k, n), spec.cfg.p_max_w));
  }
  return rec;
}

Dataset generate_dataset(const GenSpec& spec) {
  if (spec.count < 1) throw std::invalid_argument("record count must be >= 1");
  spec.cfg.validate();
  spec.chan.validate();
  if (spec.tmpl.width() < 1) throw std::invalid_argument("template must have users");

  Dataset ds;
  ds.header.seed = spec.seed;
  ds.header.count = spec.count;
  ds.header.tmpl = spec.tmpl;
  ds.header.cfg = spec.cfg;
  ds.header.chan = spec.chan;
  ds.header.ranges = spec.ranges;
  ds.header.label_draws = spec.label_draws;
  ds.header.n_cap = spec.cfg.n_max;
  ds.header.frozen_gain = spec.frozen_gain;
  ds.header.cfg_digest = system_digest(spec.cfg, spec.chan);
  ds.records.resize(spec.count);

  int threads = spec.threads > 0 ? spec.threads
                                 : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<int>(threads, spec.count);
  if (threads <= 1) {
    for (int i = 0; i < spec.count; ++i) ds.records[i] = generate_record(spec, i);
  } else {
    // Records own their seeds, so sharding does not change any record.
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= spec.count) return;
        ds.records[i] = generate_record(spec, i);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return ds;
}

std::vector<TrainingSample> Dataset::training_samples(bool feasible_only) const {
  std::vector<TrainingSample> out;
  for (const auto& r : records)
    if (!feasible_only || r.feasible) out.push_back(r.sample);
  return out;
}

std::pair<std::vector<int>, std::vector<int>> Dataset::split_indices() const {
  std::vector<int> train, test;
  int cut = static_cast<int>(records.size()) * 9 / 10;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    if (!records[i].feasible) continue;
    (i < cut ? train : test).push_back(i);
  }
  return {train, test};
}

// --- persistence ----------------------------------------------------------

namespace {

json traffic_to_json(const UserSpec& u) {
  json j;
  switch (u.service) {
    case Service::tolerant:
      j["rate_bps"] = std::get<TolerantTraffic>(u.traffic).mean_rate_bps;
      break;
    case Service::sensitive: {
      const auto& t = std::get<SensitiveTraffic>(u.traffic);
      j["arrival_pps"] = t.arrival_rate_pps;
      j["inv_packet_bits"] = t.inv_packet_bits;
      j["delay_s"] = t.delay_bound_s;
      j["violation"] = t.violation_prob;
      break;
    }
    case Service::urllc: {
      const auto& t = std::get<UrllcTraffic>(u.traffic);
      j["packet_bits"] = t.packet_bits;
      j["error_bound"] = t.error_bound;
      break;
    }
  }
  return j;
}

UserSpec user_from_json(const json& j) {
  UserSpec u;
  u.service = service_from_name(j.at("svc").get<std::string>());
  u.alpha = j.at("alpha").get<double>();
  const json& t = j.at("traffic");
  switch (u.service) {
    case Service::tolerant:
      u.traffic = TolerantTraffic{t.at("rate_bps").get<double>()};
      break;
    case Service::sensitive:
      u.traffic = SensitiveTraffic{t.at("arrival_pps").get<double>(),
                                   t.at("inv_packet_bits").get<double>(),
                                   t.at("delay_s").get<double>(), t.at("violation").get<double>()};
      break;
    case Service::urllc:
      u.traffic = UrllcTraffic{t.at("packet_bits").get<double>(),
                               t.at("error_bound").get<double>()};
      break;
  }
  return u;
}

std::vector<std::string> template_names(const ScenarioTemplate& tmpl) {
  std::vector<std::string> v;
  for (Service s : tmpl.slots) v.emplace_back(service_name(s));
  return v;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);

  json h;
  h["type"] = "raqos-dataset";
  h["schema"] = ds.header.schema;
  h["seed"] = ds.header.seed;
  h["count"] = ds.header.count;
  h["slots"] = template_names(ds.header.tmpl);
  h["cfg_digest"] = ds.header.cfg_digest;
  h["label_draws"] = ds.header.label_draws;
  h["n_cap"] = ds.header.n_cap;
  h["frozen_gain"] = ds.header.frozen_gain;
  const SystemConfig& c = ds.header.cfg;
  h["cfg"] = {{"subcarrier_bw_hz", c.subcarrier_bw_hz}, {"tti_s", c.tti_s},
              {"coherence_s", c.coherence_s}, {"n_antennas", c.n_antennas},
              {"noise_w_hz", c.noise_w_hz}, {"snr_gap", c.snr_gap},
              {"amp_efficiency", c.amp_efficiency}, {"p_ca_w", c.p_ca_w},
              {"p0_circuit_w", c.p0_circuit_w}, {"n_max", c.n_max}, {"p_max_w", c.p_max_w}};
  const ChannelParams& ch = ds.header.chan;
  h["chan"] = {{"cell_radius_m", ch.cell_radius_m},
               {"pathloss_intercept_db", ch.pathloss_intercept_db},
               {"pathloss_slope_db", ch.pathloss_slope_db},
               {"shadowing_sigma_db", ch.shadowing_sigma_db},
               {"n_antennas", ch.n_antennas},
               {"rng_seed", ch.rng_seed}};
  const TrafficRanges& r = ds.header.ranges;
  h["ranges"] = {{"tolerant_rate_bps", {r.tolerant_rate_bps_min, r.tolerant_rate_bps_max}},
                 {"sens_arrival_pps", {r.sens_arrival_pps_min, r.sens_arrival_pps_max}},
                 {"sens_packet_bits", {r.sens_packet_bits_min, r.sens_packet_bits_max}},
                 {"sens_delay_bound_s", r.sens_delay_bound_s},
                 {"sens_violation_prob", r.sens_violation_prob},
                 {"urllc_packet_bits", {r.urllc_packet_bits_min, r.urllc_packet_bits_max}},
                 {"urllc_error_bound", r.urllc_error_bound}};
  os << h.dump() << '\n';

  for (const auto& rec : ds.records) {
    json j;
    j["i"] = rec.index;
    j["seed"] = rec.seed;
    j["feasible"] = rec.feasible;
    j["opt_total_w"] = rec.opt_total_w;
    j["d_m"] = rec.distance_m;
    json users = json::array();
    for (const auto& u : rec.users) {
      json ju;
      ju["svc"] = service_name(u.service);
      ju["alpha"] = u.alpha;
      ju["traffic"] = traffic_to_json(u);
      users.push_back(ju);
    }
    j["users"] = users;
    j["x"] = rec.sample.x;
    j["n"] = rec.sample.n_star;
    j["p"] = rec.sample.p_star;
    j["p_req"] = rec.p_req_w;
    os << j.dump() << '\n';
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty dataset file");
  json h = json::parse(line);
  if (h.at("type") != "raqos-dataset" || h.at("schema").get<int>() != 1)
    throw std::runtime_error("not a raqos-dataset v1 file");

  Dataset ds;
  ds.header.schema = h.at("schema").get<int>();
  ds.header.seed = h.at("seed").get<std::uint64_t>();
  ds.header.count = h.at("count").get<int>();
  for (const auto& s : h.at("slots"))
    ds.header.tmpl.slots.push_back(service_from_name(s.get<std::string>()));
  ds.header.cfg_digest = h.at("cfg_digest").get<std::string>();
  ds.header.label_draws = h.at("label_draws").get<int>();
  ds.header.n_cap = h.at("n_cap").get<int>();
  ds.header.frozen_gain = h.at("frozen_gain").get<bool>();
  const json& c = h.at("cfg");
  SystemConfig& cfg = ds.header.cfg;
  cfg.subcarrier_bw_hz = c.at("subcarrier_bw_hz").get<double>();
  cfg.tti_s = c.at("tti_s").get<double>();
  cfg.coherence_s = c.at("coherence_s").get<double>();
  cfg.n_antennas = c.at("n_antennas").get<int>();
  cfg.noise_w_hz = c.at("noise_w_hz").get<double>();
  cfg.snr_gap = c.at("snr_gap").get<double>();
  cfg.amp_efficiency = c.at("amp_efficiency").get<double>();
  cfg.p_ca_w = c.at("p_ca_w").get<double>();
  cfg.p0_circuit_w = c.at("p0_circuit_w").get<double>();
  cfg.n_max = c.at("n_max").get<int>();
  cfg.p_max_w = c.at("p_max_w").get<double>();
  const json& ch = h.at("chan");
  ChannelParams& chan = ds.header.chan;
  chan.cell_radius_m = ch.at("cell_radius_m").get<double>();
  chan.pathloss_intercept_db = ch.at("pathloss_intercept_db").get<double>();
  chan.pathloss_slope_db = ch.at("pathloss_slope_db").get<double>();
  chan.shadowing_sigma_db = ch.at("shadowing_sigma_db").get<double>();
  chan.n_antennas = ch.at("n_antennas").get<int>();
  chan.rng_seed = ch.at("rng_seed").get<std::uint64_t>();
  const json& r = h.at("ranges");
  TrafficRanges& tr = ds.header.ranges;
  tr.tolerant_rate_bps_min = r.at("tolerant_rate_bps")[0].get<double>();
  tr.tolerant_rate_bps_max = r.at("tolerant_rate_bps")[1].get<double>();
  tr.sens_arrival_pps_min = r.at("sens_arrival_pps")[0].get<double>();
  tr.sens_arrival_pps_max = r.at("sens_arrival_pps")[1].get<double>();
  tr.sens_packet_bits_min = r.at("sens_packet_bits")[0].get<double>();
  tr.sens_packet_bits_max = r.at("sens_packet_bits")[1].get<double>();
  tr.sens_delay_bound_s = r.at("sens_delay_bound_s").get<double>();
  tr.sens_violation_prob = r.at("sens_violation_prob").get<double>();
  tr.urllc_packet_bits_min = r.at("urllc_packet_bits")[0].get<double>();
  tr.urllc_packet_bits_max = r.at("urllc_packet_bits")[1].get<double>();
  tr.urllc_error_bound = r.at("urllc_error_bound").get<double>();

  if (ds.header.cfg_digest != system_digest(cfg, chan))
    throw std::runtime_error("dataset digest does not match its stored configuration");

  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    DatasetRecord rec;
    rec.index = j.at("i").get<int>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.feasible = j.at("feasible").get<bool>();
    rec.opt_total_w = j.at("opt_total_w").get<double>();
    rec.distance_m = j.at("d_m").get<std::vector<double>>();
    for (const auto& ju : j.at("users")) rec.users.push_back(user_from_json(ju));
    rec.sample.x = j.at("x").get<std::vector<double>>();
    rec.sample.n_star = j.at("n").get<std::vector<int>>();
    rec.sample.p_star = j.at("p").get<std::vector<double>>();
    rec.p_req_w = j.at("p_req").get<std::vector<std::vector<double>>>();
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace raqos

#include "raqos/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace raqos {

double dbm_to_w(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double w_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

SystemConfig RunConfig::to_system_config() const {
  SystemConfig c;
  c.subcarrier_bw_hz = subcarrier_bw_khz * 1e3;
  c.tti_s = tti_ms * 1e-3;
  c.coherence_s = coherence_ms * 1e-3;
  c.n_antennas = n_antennas;
  c.noise_w_hz = dbm_to_w(noise_dbm_hz);
  c.snr_gap = snr_gap;
  c.amp_efficiency = amp_efficiency;
  c.p_ca_w = p_ca_override_mw >= 0.0 ? p_ca_override_mw * 1e-3
                                     : circuit_power_per_antenna_mw * 1e-3 / n_max;
  c.p0_circuit_w = fixed_circuit_power_mw * 1e-3;
  c.n_max = n_max;
  c.p_max_w = dbm_to_w(p_max_dbm);
  c.validate();
  return c;
}

ChannelParams RunConfig::to_channel_params() const {
  ChannelParams c;
  c.cell_radius_m = cell_radius_m;
  c.pathloss_intercept_db = pathloss_intercept_db;
  c.pathloss_slope_db = pathloss_slope_db;
  c.shadowing_sigma_db = shadowing_sigma_db;
  c.n_antennas = n_antennas;
  c.rng_seed = seed;
  c.validate();
  return c;
}

TrafficRanges RunConfig::to_ranges() const {
  TrafficRanges r;
  r.tolerant_rate_bps_min = tolerant_rate_kbytes_min * 8000.0;
  r.tolerant_rate_bps_max = tolerant_rate_kbytes_max * 8000.0;
  r.sens_arrival_pps_min = sens_arrival_pps_min;
  r.sens_arrival_pps_max = sens_arrival_pps_max;
  r.sens_packet_bits_min = sens_packet_kbits_min * 1000.0;
  r.sens_packet_bits_max = sens_packet_kbits_max * 1000.0;
  r.sens_delay_bound_s = sens_delay_bound_ms * 1e-3;
  r.sens_violation_prob = sens_violation_prob;
  r.urllc_packet_bits_min = urllc_packet_bytes_min * 8.0;
  r.urllc_packet_bits_max = urllc_packet_bytes_max * 8.0;
  r.urllc_error_bound = urllc_error_bound;
  return r;
}

SolverConfig RunConfig::to_solver_config() const {
  SolverConfig s;
  s.step_scale = solver_step_scale;
  s.max_iters = solver_max_iters;
  s.draws_per_iter = solver_draws_per_iter;
  s.residual_tol = solver_residual_tol;
  s.window_min = solver_window;
  s.oracle_draws = oracle_draws;
  s.bisect_rel_width = bisect_rel_width;
  s.validate();
  return s;
}

TrainConfig RunConfig::to_train_config() const {
  TrainConfig t;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.epochs = epochs;
  t.seed = train_seed;
  t.init = init == "gauss" ? MlpModel::Init::gauss : MlpModel::Init::he;
  return t;
}

ScenarioTemplate RunConfig::to_template() const {
  int a = 0, b = 0, c = 0;
  if (std::sscanf(service_ratio.c_str(), "%d:%d:%d", &a, &b, &c) != 3)
    throw std::invalid_argument("service_ratio must look like 1:1:1");
  return ratio_template(users_total, a, b, c);
}

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number: " + s);
  return v;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    auto dbl = [&m](const char* key, double RunConfig::*p) {
      m[key] = {[p](RunConfig& c, const std::string& v) { c.*p = to_double(v); },
                [p](const RunConfig& c) { return num(c.*p); }};
    };
    auto integer = [&m](const char* key, int RunConfig::*p) {
      m[key] = {[p](RunConfig& c, const std::string& v) { c.*p = static_cast<int>(to_double(v)); },
                [p](const RunConfig& c) { return std::to_string(c.*p); }};
    };
    auto u64 = [&m](const char* key, std::uint64_t RunConfig::*p) {
      m[key] = {[p](RunConfig& c, const std::string& v) { c.*p = std::stoull(v); },
                [p](const RunConfig& c) { return std::to_string(c.*p); }};
    };
    auto str = [&m](const char* key, std::string RunConfig::*p) {
      m[key] = {[p](RunConfig& c, const std::string& v) { c.*p = v; },
                [p](const RunConfig& c) { return c.*p; }};
    };

    dbl("p_max_dbm", &RunConfig::p_max_dbm);
    dbl("tti_ms", &RunConfig::tti_ms);
    dbl("subcarrier_bw_khz", &RunConfig::subcarrier_bw_khz);
    dbl("coherence_ms", &RunConfig::coherence_ms);
    dbl("noise_dbm_hz", &RunConfig::noise_dbm_hz);
    integer("n_antennas", &RunConfig::n_antennas);
    integer("n_max", &RunConfig::n_max);
    dbl("circuit_power_per_antenna_mw", &RunConfig::circuit_power_per_antenna_mw);
    dbl("p_ca_override_mw", &RunConfig::p_ca_override_mw);
    dbl("fixed_circuit_power_mw", &RunConfig::fixed_circuit_power_mw);
    dbl("amp_efficiency", &RunConfig::amp_efficiency);
    dbl("snr_gap", &RunConfig::snr_gap);
    dbl("cell_radius_m", &RunConfig::cell_radius_m);
    dbl("pathloss_intercept_db", &RunConfig::pathloss_intercept_db);
    dbl("pathloss_slope_db", &RunConfig::pathloss_slope_db);
    dbl("shadowing_sigma_db", &RunConfig::shadowing_sigma_db);
    integer("urllc_packet_bytes_min", &RunConfig::urllc_packet_bytes_min);
    integer("urllc_packet_bytes_max", &RunConfig::urllc_packet_bytes_max);
    dbl("urllc_error_bound", &RunConfig::urllc_error_bound);
    dbl("tolerant_rate_kbytes_min", &RunConfig::tolerant_rate_kbytes_min);
    dbl("tolerant_rate_kbytes_max", &RunConfig::tolerant_rate_kbytes_max);
    dbl("sens_arrival_pps_min", &RunConfig::sens_arrival_pps_min);
    dbl("sens_arrival_pps_max", &RunConfig::sens_arrival_pps_max);
    dbl("sens_packet_kbits_min", &RunConfig::sens_packet_kbits_min);
    dbl("sens_packet_kbits_max", &RunConfig::sens_packet_kbits_max);
    dbl("sens_delay_bound_ms", &RunConfig::sens_delay_bound_ms);
    dbl("sens_violation_prob", &RunConfig::sens_violation_prob);
    integer("users_total", &RunConfig::users_total);
    str("service_ratio", &RunConfig::service_ratio);
    u64("seed", &RunConfig::seed);
    dbl("solver_step_scale", &RunConfig::solver_step_scale);
    integer("solver_max_iters", &RunConfig::solver_max_iters);
    integer("solver_draws_per_iter", &RunConfig::solver_draws_per_iter);
    dbl("solver_residual_tol", &RunConfig::solver_residual_tol);
    dbl("solver_urllc_residual_tol", &RunConfig::solver_urllc_residual_tol);
    integer("solver_window", &RunConfig::solver_window);
    integer("oracle_draws", &RunConfig::oracle_draws);
    integer("label_draws", &RunConfig::label_draws);
    dbl("bisect_rel_width", &RunConfig::bisect_rel_width);
    str("phi1_hidden", &RunConfig::phi1_hidden);
    str("phi2_hidden", &RunConfig::phi2_hidden);
    str("fnn_hidden", &RunConfig::fnn_hidden);
    integer("batch_size", &RunConfig::batch_size);
    dbl("learning_rate", &RunConfig::learning_rate);
    integer("epochs", &RunConfig::epochs);
    str("init", &RunConfig::init);
    u64("train_seed", &RunConfig::train_seed);
    integer("threads", &RunConfig::threads);
    return m;
  }();
  return f;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = fields().find(key);
    if (it == fields().end())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key " + key);
    it->second.set(cfg, value);
    cfg.explicit_keys.insert(key);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string RunConfig::to_string() const {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(*this) << '\n';
  return os.str();
}

std::vector<int> parse_hidden(const std::string& csv) {
  std::vector<int> v;
  std::istringstream is(csv);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    v.push_back(std::stoi(tok));
  }
  if (v.empty()) throw std::invalid_argument("empty layer list: " + csv);
  return v;
}

}  // namespace raqos

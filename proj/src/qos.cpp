#include "raqos/qos.hpp"

#include <cmath>
#include <stdexcept>

namespace raqos {

namespace {
constexpr double kLn2 = 0.6931471805599453094172321;
}

void SystemConfig::validate() const {
  if (!(subcarrier_bw_hz > 0.0)) throw std::invalid_argument("subcarrier bandwidth must be positive");
  if (!(tti_s > 0.0)) throw std::invalid_argument("TTI must be positive");
  if (!(coherence_s > 0.0)) throw std::invalid_argument("coherence time must be positive");
  if (n_antennas < 1) throw std::invalid_argument("antenna count must be >= 1");
  if (!(noise_w_hz > 0.0)) throw std::invalid_argument("noise density must be positive");
  if (snr_gap < 1.0) throw std::invalid_argument("SNR gap must be >= 1");
  if (!(amp_efficiency > 0.0) || amp_efficiency > 1.0)
    throw std::invalid_argument("amplifier efficiency must be in (0, 1]");
  if (p_ca_w < 0.0 || p0_circuit_w < 0.0) throw std::invalid_argument("circuit powers must be >= 0");
  if (n_max < 1) throw std::invalid_argument("subcarrier budget must be >= 1");
  if (!(p_max_w > 0.0)) throw std::invalid_argument("transmit budget must be positive");
}

const char* service_name(Service s) {
  switch (s) {
    case Service::tolerant: return "tolerant";
    case Service::sensitive: return "sensitive";
    case Service::urllc: return "urllc";
  }
  return "?";
}

Service service_from_name(const std::string& name) {
  if (name == "tolerant") return Service::tolerant;
  if (name == "sensitive") return Service::sensitive;
  if (name == "urllc") return Service::urllc;
  throw std::invalid_argument("unknown service: " + name);
}

double UserSpec::feature() const {
  switch (service) {
    case Service::tolerant: return std::get<TolerantTraffic>(traffic).mean_rate_bps;
    case Service::sensitive: {
      const auto& t = std::get<SensitiveTraffic>(traffic);
      if (t.arrival_rate_pps <= 0.0) return 0.0;
      return effective_bandwidth(t);
    }
    case Service::urllc: return std::get<UrllcTraffic>(traffic).packet_bits;
  }
  return 0.0;
}

void UserSpec::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  switch (service) {
    case Service::tolerant: {
      const auto& t = std::get<TolerantTraffic>(traffic);
      if (t.mean_rate_bps < 0.0) throw std::invalid_argument("mean rate must be >= 0");
      break;
    }
    case Service::sensitive: {
      const auto& t = std::get<SensitiveTraffic>(traffic);
      if (t.arrival_rate_pps < 0.0) throw std::invalid_argument("arrival rate must be >= 0");
      if (t.arrival_rate_pps > 0.0) {
        if (!(t.inv_packet_bits > 0.0) || !(t.delay_bound_s > 0.0))
          throw std::invalid_argument("sensitive traffic needs positive nu_s and delay bound");
        if (!(t.violation_prob > 0.0) || t.violation_prob >= 1.0)
          throw std::invalid_argument("violation probability must be in (0, 1)");
      }
      break;
    }
    case Service::urllc: {
      const auto& t = std::get<UrllcTraffic>(traffic);
      if (t.packet_bits < 0.0) throw std::invalid_argument("packet bits must be >= 0");
      if (t.packet_bits > 0.0 && (!(t.error_bound > 0.0) || t.error_bound >= 1.0))
        throw std::invalid_argument("error bound must be in (0, 1)");
      break;
    }
  }
}

double qos_exponent(const SensitiveTraffic& t) {
  if (!(t.violation_prob > 0.0) || t.violation_prob >= 1.0)
    throw std::invalid_argument("violation probability must be in (0, 1)");
  if (!(t.arrival_rate_pps > 0.0) || !(t.inv_packet_bits > 0.0) || !(t.delay_bound_s > 0.0))
    throw std::invalid_argument("sensitive traffic fields must be positive");
  double lg = std::log(t.violation_prob);  // < 0
  double denom = lg - t.arrival_rate_pps * t.delay_bound_s;
  return t.inv_packet_bits * lg / denom;
}

double effective_bandwidth(const SensitiveTraffic& t) {
  double theta = qos_exponent(t);
  double denom = t.inv_packet_bits - theta;
  if (!(denom > 0.0)) throw std::invalid_argument("QoS exponent must be below nu_s");
  return t.arrival_rate_pps / denom;
}

double avg_rate_tolerant(const UserSpec& user, int n, double p,
                         std::span<const double> gains, const SystemConfig& cfg) {
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  if (p < 0.0) throw std::invalid_argument("power must be >= 0");
  if (gains.empty()) throw std::invalid_argument("gain draws must be non-empty");
  if (p == 0.0) return 0.0;
  double c = user.alpha * p /
             (cfg.noise_w_hz * cfg.n_antennas * static_cast<double>(n) * cfg.subcarrier_bw_hz);
  double acc = 0.0;
  for (double g : gains) acc += std::log1p(c * g);
  double mean_log2 = acc / (kLn2 * static_cast<double>(gains.size()));
  return static_cast<double>(n) * cfg.subcarrier_bw_hz * mean_log2;
}

double effective_capacity(const UserSpec& user, int n, double p,
                          std::span<const double> gains, const SystemConfig& cfg) {
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  if (p < 0.0) throw std::invalid_argument("power must be >= 0");
  if (gains.empty()) throw std::invalid_argument("gain draws must be non-empty");
  const auto& t = std::get<SensitiveTraffic>(user.traffic);
  double theta = qos_exponent(t);
  if (p == 0.0) return 0.0;
  double w_exp = theta * cfg.coherence_s * cfg.subcarrier_bw_hz / kLn2;  // varpi
  double c = user.alpha * p /
             (cfg.snr_gap * cfg.noise_w_hz * cfg.n_antennas * static_cast<double>(n) *
              cfg.subcarrier_bw_hz);
  double acc = 0.0;
  for (double g : gains) acc += std::exp(-w_exp * std::log1p(c * g));
  double mean = acc / static_cast<double>(gains.size());
  return -(static_cast<double>(n) / (theta * cfg.coherence_s)) * std::log(mean);
}

double urllc_error_prob(const UserSpec& user, int n, double p,
                        std::span<const double> gains, const SystemConfig& cfg) {
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  if (p < 0.0) throw std::invalid_argument("power must be >= 0");
  std::size_t draws = gains.size() / static_cast<std::size_t>(n);
  if (draws == 0) throw std::invalid_argument("need at least n gains per draw");
  const auto& t = std::get<UrllcTraffic>(user.traffic);
  double tsw = cfg.tti_s * cfg.subcarrier_bw_hz;
  double scale = std::sqrt(tsw / static_cast<double>(n));
  double bits_term = t.packet_bits * kLn2 / tsw;
  double c = user.alpha * p /
             (cfg.noise_w_hz * cfg.n_antennas * static_cast<double>(n) * cfg.subcarrier_bw_hz);
  double acc = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    const double* chunk = gains.data() + d * static_cast<std::size_t>(n);
    double sum_log = 0.0;
    for (int i = 0; i < n; ++i) sum_log += std::log1p(c * chunk[i]);
    acc += q_function(scale * (sum_log - bits_term));
  }
  return acc / static_cast<double>(draws);
}

double q_function(double x) { return 0.5 * std::erfc(x * 0.7071067811865475244008444); }

double q_inverse(double eps) {
  if (!(eps > 0.0) || !(eps < 1.0)) throw std::invalid_argument("eps must be in (0, 1)");
  // Q is strictly decreasing; bisect then polish with Newton.
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (q_function(mid) > eps)
      lo = mid;
    else
      hi = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 4; ++i) {
    double f = q_function(x) - eps;
    double pdf = 0.3989422804014326779399461 * std::exp(-0.5 * x * x);
    if (pdf <= 0.0) break;
    x += f / pdf;  // dQ/dx = -pdf
  }
  return x;
}

double total_power(double sum_p_w, int sum_n, const SystemConfig& cfg) {
  return sum_p_w / cfg.amp_efficiency +
         cfg.p_ca_w * cfg.n_antennas * static_cast<double>(sum_n) + cfg.p0_circuit_w;
}

double total_power(const Allocation& alloc, const SystemConfig& cfg) {
  double sp = 0.0;
  int sn = 0;
  for (double p : alloc.p) sp += p;
  for (int n : alloc.n) sn += n;
  return total_power(sp, sn, cfg);
}

}  // namespace raqos

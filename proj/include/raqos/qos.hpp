#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace raqos {

// Radio and power constants of one base station. All values in SI units; the
// config layer converts dBm/bytes at the boundary.
struct SystemConfig {
  double subcarrier_bw_hz = 120e3;   // W
  double tti_s = 125e-6;             // T_s
  double coherence_s = 5e-3;         // T_c
  int n_antennas = 64;               // N_T
  double noise_w_hz = 3.9810717055349725e-21;  // N_0, -174 dBm/Hz
  double snr_gap = 2.0;              // Phi, >= 1; applies to delay-sensitive rates
  double amp_efficiency = 0.5;       // rho, in (0, 1]
  double p_ca_w = 0.05 / 256.0;      // circuit power per antenna per subcarrier
  double p0_circuit_w = 0.05;        // fixed circuit power
  int n_max = 256;                   // subcarrier budget
  double p_max_w = 39.810717055349734;  // transmit budget, 46 dBm

  void validate() const;  // throws std::invalid_argument
};

enum class Service { tolerant, sensitive, urllc };

const char* service_name(Service s);
Service service_from_name(const std::string& name);

struct TolerantTraffic {
  double mean_rate_bps = 0.0;  // average arrival rate a_bar
};

struct SensitiveTraffic {
  double arrival_rate_pps = 0.0;   // nu_a, packets/s
  double inv_packet_bits = 0.0;    // nu_s, 1/bits
  double delay_bound_s = 0.0;      // D
  double violation_prob = 0.0;     // epsilon_q
};

struct UrllcTraffic {
  double packet_bits = 0.0;  // B
  double error_bound = 0.0;  // epsilon_max
};

// One user: service class, large-scale gain, traffic descriptor.
struct UserSpec {
  Service service = Service::tolerant;
  double alpha = 0.0;  // linear large-scale power gain
  std::variant<TolerantTraffic, SensitiveTraffic, UrllcTraffic> traffic;

  // Scalar traffic feature c_k: mean arrival rate, effective bandwidth, or
  // packet bits. Zero marks an inactive (padded) user that demands nothing.
  double feature() const;
  bool active() const { return feature() > 0.0; }

  void validate() const;
};

// Integer subcarrier counts and transmit powers per user.
struct Allocation {
  std::vector<int> n;
  std::vector<double> p;
};

// QoS exponent theta of a delay-sensitive user, 0 < theta < nu_s.
double qos_exponent(const SensitiveTraffic& t);

// Effective bandwidth E^B = nu_a / (nu_s - theta); >= the mean rate nu_a/nu_s.
double effective_bandwidth(const SensitiveTraffic& t);

// Average achievable rate of a delay-tolerant user in bits/s:
// n * W * mean_g log2(1 + alpha g p / (N0 NT n W)). Each gain entry is one
// scalar realization.
double avg_rate_tolerant(const UserSpec& user, int n, double p,
                         std::span<const double> gains, const SystemConfig& cfg);

// Effective capacity of a delay-sensitive user in bits/s, block-fading form:
// -(n / (theta Tc)) * ln mean_g (1 + alpha g p / (Phi N0 NT n W))^-w with
// w = theta Tc W / ln 2.
double effective_capacity(const UserSpec& user, int n, double p,
                          std::span<const double> gains, const SystemConfig& cfg);

// Average decoding error probability of a URLLC user under the short-block
// normal approximation with dispersion V ~ n. Consumes the gain span in
// consecutive chunks of n (one chunk = the per-subcarrier gains of one draw).
double urllc_error_prob(const UserSpec& user, int n, double p,
                        std::span<const double> gains, const SystemConfig& cfg);

// Gaussian tail Q(x) = erfc(x / sqrt 2) / 2 and its inverse.
double q_function(double x);
double q_inverse(double eps);  // |Q(x) - eps| < 1e-12

// Total BS power: transmit / rho + P_ca NT sum(n) + P0c.
double total_power(const Allocation& alloc, const SystemConfig& cfg);
double total_power(double sum_p_w, int sum_n, const SystemConfig& cfg);

}  // namespace raqos

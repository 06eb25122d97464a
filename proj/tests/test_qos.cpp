#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "raqos/channel.hpp"
#include "raqos/qos.hpp"

using namespace raqos;
using testutil::desk_cfg;
using testutil::sensitive_user;
using testutil::tolerant_user;
using testutil::urllc_user;

namespace {
constexpr double kLn2 = 0.6931471805599453;

// Straight-line Monte Carlo of the tolerant rate, independent of the library
// code path.
double mc_rate_oracle(double alpha, double p, int n, int n_t, const SystemConfig& cfg,
                      int draws, std::uint64_t seed) {
  RngStream rng(seed);
  double c = alpha * p / (cfg.noise_w_hz * n_t * n * cfg.subcarrier_bw_hz);
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) acc += std::log(1.0 + c * rng.gamma(n_t)) / kLn2;
  return n * cfg.subcarrier_bw_hz * acc / draws;
}
}  // namespace

TEST_CASE("tolerant average rate") {
  SystemConfig cfg = desk_cfg();
  SUBCASE("zero power sends nothing") {
    UserSpec u = tolerant_user(1e-12, 5e5);
    std::vector<double> g(10, 3.0);
    CHECK(avg_rate_tolerant(u, 4, 0.0, g, cfg) == 0.0);
  }
  SUBCASE("unit-SNR identity on a frozen channel") {
    SystemConfig c1 = cfg;
    c1.n_antennas = 1;
    UserSpec u = tolerant_user(c1.noise_w_hz * c1.subcarrier_bw_hz, 5e5);
    std::vector<double> g(1, 1.0);  // alpha * 1 * 1 / (N0 * 1 * 1 * W) = 1
    CHECK(avg_rate_tolerant(u, 1, 1.0, g, c1) ==
          doctest::Approx(c1.subcarrier_bw_hz).epsilon(1e-12));
  }
  SUBCASE("Monte Carlo estimate agrees with a deeper independent run") {
    UserSpec u = tolerant_user(1e-12, 0.0);
    RngStream rng(77);
    ChannelDraw d = sample_small_scale(1, 10000, 64, rng);
    double est = avg_rate_tolerant(u, 4, 1.0, d.row(0), cfg);
    double oracle = mc_rate_oracle(1e-12, 1.0, 4, 64, cfg, 1000000, 1234);
    CHECK(est == doctest::Approx(oracle).epsilon(0.01));
  }
  SUBCASE("strictly increasing in power on shared draws") {
    UserSpec u = tolerant_user(1e-12, 0.0);
    RngStream rng(7);
    ChannelDraw d = sample_small_scale(1, 2000, 64, rng);
    double prev = 0.0;
    for (double p : {0.1, 0.2, 0.5, 1.0, 2.0}) {
      double r = avg_rate_tolerant(u, 4, p, d.row(0), cfg);
      CHECK(r > prev);
      prev = r;
    }
  }
  SUBCASE("empty draws rejected") {
    UserSpec u = tolerant_user(1e-12, 5e5);
    CHECK_THROWS_AS(avg_rate_tolerant(u, 1, 1.0, {}, cfg), std::invalid_argument);
  }
}

TEST_CASE("QoS exponent and effective bandwidth") {
  SUBCASE("Table-range example values") {
    SensitiveTraffic t{100.0, 1e-3, 0.05, 1e-2};
    CHECK(qos_exponent(t) == doctest::Approx(4.794e-4).epsilon(1e-3));
    CHECK(effective_bandwidth(t) == doctest::Approx(1.921e5).epsilon(1e-3));
  }
  SUBCASE("violation probability near one drives theta to zero") {
    SensitiveTraffic t{100.0, 1e-3, 0.05, 1.0 - 1e-9};
    CHECK(qos_exponent(t) < 1e-11);
    CHECK(effective_bandwidth(t) == doctest::Approx(100.0 / 1e-3).epsilon(1e-6));
  }
  SUBCASE("huge delay bound drives theta to zero") {
    SensitiveTraffic t{100.0, 1e-3, 1e9, 1e-2};
    CHECK(qos_exponent(t) < 1e-9);
  }
  SUBCASE("round trip exp(-theta E^B D) = eps_q, and E^B >= mean rate") {
    RngStream rng(5);
    for (int i = 0; i < 100; ++i) {
      double nu_a = 100.0 + 900.0 * rng.uniform();
      double bits = 1000.0 + 19000.0 * rng.uniform();
      SensitiveTraffic t{nu_a, 1.0 / bits, 0.05, 1e-2};
      double theta = qos_exponent(t);
      double eb = effective_bandwidth(t);
      CHECK(std::abs(std::exp(-theta * eb * t.delay_bound_s) - t.violation_prob) /
                t.violation_prob <
            1e-9);
      CHECK(eb >= nu_a * bits);
      CHECK(theta > 0.0);
      CHECK(theta < t.inv_packet_bits);
    }
  }
  SUBCASE("invalid violation probability") {
    SensitiveTraffic t{100.0, 1e-3, 0.05, 1.5};
    CHECK_THROWS_AS(qos_exponent(t), std::invalid_argument);
  }
}

TEST_CASE("effective capacity") {
  SystemConfig cfg = desk_cfg();
  SUBCASE("zero power gives zero capacity") {
    UserSpec u = sensitive_user(1e-12, 100.0, 1000.0);
    std::vector<double> g(10, 2.0);
    CHECK(effective_capacity(u, 2, 0.0, g, cfg) == 0.0);
  }
  SUBCASE("deterministic channel collapses to the gap rate") {
    UserSpec u = sensitive_user(1e-12, 100.0, 1000.0);
    std::vector<double> g(1, 1.0);
    double p = 0.5;
    int n = 3;
    double snr = u.alpha * 1.0 * p / (cfg.snr_gap * cfg.noise_w_hz * cfg.n_antennas * n *
                                      cfg.subcarrier_bw_hz);
    double expect = n * cfg.subcarrier_bw_hz * std::log2(1.0 + snr);
    CHECK(effective_capacity(u, n, p, g, cfg) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("theta -> 0 limit approaches the gap-penalized mean rate") {
    // eps_q chosen so theta ~ 1e-9.
    UserSpec u = sensitive_user(1e-12, 100.0, 10000.0, 0.05, std::exp(-5e-5));
    CHECK(qos_exponent(std::get<SensitiveTraffic>(u.traffic)) < 1e-8);
    RngStream rng(9);
    ChannelDraw d = sample_small_scale(1, 20000, 64, rng);
    double ec = effective_capacity(u, 4, 1.0, d.row(0), cfg);
    UserSpec ut = tolerant_user(u.alpha / cfg.snr_gap, 0.0);
    double rate = avg_rate_tolerant(ut, 4, 1.0, d.row(0), cfg);
    CHECK(ec == doctest::Approx(rate).epsilon(0.01));
  }
  SUBCASE("Jensen: capacity never beats the mean rate on shared draws") {
    UserSpec u = sensitive_user(1e-12, 500.0, 5000.0);
    RngStream rng(13);
    ChannelDraw d = sample_small_scale(1, 5000, 8, rng);
    double ec = effective_capacity(u, 4, 1.0, d.row(0), cfg);
    UserSpec ut = tolerant_user(u.alpha / cfg.snr_gap, 0.0);
    double rate = avg_rate_tolerant(ut, 4, 1.0, d.row(0), cfg);
    CHECK(ec <= rate);
  }
  SUBCASE("nondecreasing in power and bandwidth on shared draws") {
    UserSpec u = sensitive_user(1e-12, 500.0, 5000.0);
    RngStream rng(17);
    ChannelDraw d = sample_small_scale(1, 4000, 16, rng);
    double prev = 0.0;
    for (double p : {0.1, 0.3, 1.0, 3.0}) {
      double ec = effective_capacity(u, 4, p, d.row(0), cfg);
      CHECK(ec >= prev);
      prev = ec;
    }
    CHECK(effective_capacity(u, 6, 1.0, d.row(0), cfg) >
          effective_capacity(u, 3, 1.0, d.row(0), cfg));
  }
  SUBCASE("negative power rejected") {
    UserSpec u = sensitive_user(1e-12, 100.0, 1000.0);
    std::vector<double> g(4, 1.0);
    CHECK_THROWS_AS(effective_capacity(u, 1, -1.0, g, cfg), std::invalid_argument);
  }
}

TEST_CASE("URLLC decoding error probability") {
  SystemConfig cfg = desk_cfg();
  SUBCASE("no power, certain failure") {
    UserSpec u = urllc_user(1e-12, 160.0);
    std::vector<double> g(8, 1.0);
    CHECK(urllc_error_prob(u, 2, 0.0, g, cfg) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("enormous power, vanishing error") {
    UserSpec u = urllc_user(1e-12, 160.0);
    std::vector<double> g(8, 1.0);
    CHECK(urllc_error_prob(u, 2, 1e9, g, cfg) < 1e-12);
  }
  SUBCASE("single frozen draw matches the scalar closed form") {
    // SNR = 10, B = 160 bits, Ts W = 15.
    UserSpec u = urllc_user(1.0, 160.0);
    SystemConfig c = cfg;
    c.n_antennas = 1;
    double p = 10.0 * c.noise_w_hz * 1 * 1 * c.subcarrier_bw_hz;  // alpha=1, g=1
    std::vector<double> g(1, 1.0);
    double got = urllc_error_prob(u, 1, p, g, c);
    double tsw = c.tti_s * c.subcarrier_bw_hz;
    double expect = q_function(std::sqrt(tsw) * (std::log(11.0) - 160.0 * kLn2 / tsw));
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("strictly decreasing in power on a frozen channel") {
    UserSpec u = urllc_user(1e-12, 160.0);
    std::vector<double> g(4, 64.0);
    double prev = 2.0;
    for (double p : {0.001, 0.01, 0.1, 1.0}) {
      double e = urllc_error_prob(u, 4, p, g, cfg);
      CHECK(e < prev);
      prev = e;
    }
  }
}

TEST_CASE("Q function inverse") {
  SUBCASE("median is zero") { CHECK(q_inverse(0.5) == doctest::Approx(0.0).epsilon(1e-12)); }
  SUBCASE("deep tail value") {
    // Independent bisection on Q down to machine width.
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (q_function(mid) > 5e-8 ? lo : hi) = mid;
    }
    CHECK(q_inverse(5e-8) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));
    CHECK(q_inverse(5e-8) == doctest::Approx(5.326724).epsilon(1e-4));
  }
  SUBCASE("round trip across nine decades") {
    for (double e = 1e-1; e >= 1e-9; e /= 10.0) {
      CHECK(std::abs(q_function(q_inverse(e)) - e) < 1e-12);
    }
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(q_inverse(0.0), std::invalid_argument);
    CHECK_THROWS_AS(q_inverse(1.0), std::invalid_argument);
    CHECK_THROWS_AS(q_inverse(-0.1), std::invalid_argument);
  }
}

TEST_CASE("total power") {
  SUBCASE("idle BS burns only the fixed circuit power") {
    SystemConfig cfg = desk_cfg();
    Allocation a;
    CHECK(total_power(a, cfg) == doctest::Approx(cfg.p0_circuit_w).epsilon(1e-12));
  }
  SUBCASE("Table reading of the per-antenna circuit product") {
    SystemConfig cfg;
    cfg.amp_efficiency = 0.5;
    cfg.n_antennas = 64;
    cfg.n_max = 256;
    cfg.p_ca_w = 0.05 / 256.0;
    cfg.p0_circuit_w = 0.05;
    Allocation a;
    a.n = {256};
    a.p = {1.0};
    CHECK(total_power(a, cfg) == doctest::Approx(5.25).epsilon(1e-12));
  }
  SUBCASE("transmit term is linear in the powers") {
    SystemConfig cfg = desk_cfg();
    Allocation a;
    a.n = {3, 4};
    a.p = {0.5, 0.25};
    Allocation b = a;
    b.p = {1.0, 0.5};
    double base = total_power(a, cfg);
    double doubled = total_power(b, cfg);
    double circuit = cfg.p_ca_w * cfg.n_antennas * 7 + cfg.p0_circuit_w;
    CHECK(doubled - circuit == doctest::Approx(2.0 * (base - circuit)).epsilon(1e-12));
  }
}

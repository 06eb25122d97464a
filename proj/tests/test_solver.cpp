#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "helpers.hpp"
#include "raqos/solver.hpp"

using namespace raqos;
using testutil::desk_cfg;
using testutil::sensitive_user;
using testutil::tolerant_user;
using testutil::urllc_user;

namespace {

SolverConfig fast_solver() {
  SolverConfig s;
  s.max_iters = 20000;
  s.draws_per_iter = 64;
  s.oracle_draws = 20000;
  return s;
}

}  // namespace

TEST_CASE("closed-form URLLC power") {
  SystemConfig cfg = desk_cfg();
  SUBCASE("zero-bit packet at even odds costs nothing") {
    UserSpec u = urllc_user(1e-12, 0.0, 0.5);
    CHECK(urllc_closed_form_power(u, 3, cfg) == 0.0);
  }
  SUBCASE("regression value cross-checked by an independent evaluation") {
    UserSpec u = urllc_user(1e-12, 160.0);
    double got = urllc_closed_form_power(u, 4, cfg);

    // Second implementation: plain bisection for the Q inverse, raw pow/exp.
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(mid / std::sqrt(2.0)) > 5e-8 ? lo : hi) = mid;
    }
    double tsnw = cfg.tti_s * 4 * cfg.subcarrier_bw_hz;
    double expect = cfg.noise_w_hz * 4 * cfg.subcarrier_bw_hz / 1e-12 *
                    (std::exp(160.0 * std::log(2.0) / tsnw + 0.5 * (lo + hi) / std::sqrt(tsnw)) -
                     1.0);
    CHECK(got == doctest::Approx(expect).epsilon(1e-10));
    CHECK(got == doctest::Approx(0.02221).epsilon(2e-3));  // frozen regression constant
  }
  SUBCASE("power curve dips then rises in the bandwidth") {
    UserSpec u = urllc_user(1e-12, 160.0);
    int n_min = urllc_closed_form_minimizer(u, cfg, 256);
    CHECK(n_min > 1);
    CHECK(n_min < 256);
    for (int n = 1; n < n_min; ++n)
      CHECK(urllc_closed_form_power(u, n, cfg) > urllc_closed_form_power(u, n + 1, cfg));
    CHECK(urllc_closed_form_power(u, n_min + 1, cfg) > urllc_closed_form_power(u, n_min, cfg));
  }
}

TEST_CASE("frozen-gain inversions") {
  SystemConfig cfg = desk_cfg();
  cfg.n_antennas = 1;
  SUBCASE("tolerant matches the textbook inversion") {
    UserSpec u = tolerant_user(1e-12, 6e5);
    double expect = (std::pow(2.0, 6e5 / cfg.subcarrier_bw_hz) - 1.0) * cfg.noise_w_hz *
                    cfg.subcarrier_bw_hz / 1e-12;
    CHECK(frozen_gain_min_power(u, 1, cfg, 1.0) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("sensitive equals the gap-rate inversion at the effective bandwidth") {
    UserSpec u = sensitive_user(1e-12, 100.0, 1000.0);
    double eb = effective_bandwidth(std::get<SensitiveTraffic>(u.traffic));
    double p = frozen_gain_min_power(u, 2, cfg, 1.0);
    std::vector<double> g(1, 1.0);
    CHECK(effective_capacity(u, 2, p, g, cfg) == doctest::Approx(eb).epsilon(1e-9));
  }
}

TEST_CASE("projected SGD power iterations") {
  SystemConfig cfg = desk_cfg();
  SolverConfig sol = fast_solver();

  SUBCASE("zero demand needs zero power") {
    RngStream rng(1);
    UserSpec u = tolerant_user(1e-12, 0.0);
    auto res = sgd_min_power_tolerant(u, 2, cfg, sol, GainModel::gamma(64), rng);
    CHECK(res.ok());
    CHECK(res.power_w == 0.0);
  }

  SUBCASE("frozen gains: recovers the analytic inversion from a cold start") {
    SystemConfig c1 = cfg;
    c1.n_antennas = 1;
    UserSpec u = tolerant_user(1e-12, 6e5);
    double expect = frozen_gain_min_power(u, 1, c1, 1.0);
    RngStream rng(2);
    auto res = sgd_min_power_tolerant(u, 1, c1, sol, GainModel::frozen(1.0), rng,
                                      expect * 0.5);
    CHECK(res.ok());
    CHECK(res.power_w == doctest::Approx(expect).epsilon(0.02));
  }

  SUBCASE("doubling the demand raises the power") {
    UserSpec u1 = tolerant_user(1e-12, 4e5);
    UserSpec u2 = tolerant_user(1e-12, 8e5);
    RngStream ra(3), rb(3);
    GainModel m = GainModel::gamma(64);
    auto p1 = sgd_min_power_tolerant(u1, 2, cfg, sol, m, ra);
    auto p2 = sgd_min_power_tolerant(u2, 2, cfg, sol, m, rb);
    CHECK(p1.ok());
    CHECK(p2.ok());
    CHECK(p2.power_w > p1.power_w);
  }

  SUBCASE("sensitive frozen gains: matches the deterministic identity") {
    SystemConfig c1 = cfg;
    c1.n_antennas = 1;
    UserSpec u = sensitive_user(1e-12, 200.0, 4000.0);
    double expect = frozen_gain_min_power(u, 2, c1, 1.0);
    RngStream rng(4);
    auto res = sgd_min_power_sensitive(u, 2, c1, sol, GainModel::frozen(1.0), rng,
                                       expect * 0.5);
    CHECK(res.ok());
    CHECK(res.power_w == doctest::Approx(expect).epsilon(0.02));
  }

  SUBCASE("urllc shrinking demand: error bound near one needs almost nothing") {
    UserSpec u = urllc_user(1e-12, 160.0, 0.9);
    RngStream rng(5);
    SolverConfig s = sol;
    s.residual_tol = 0.1;
    s.draws_per_iter = 256;
    auto res = sgd_min_power_urllc(u, 4, cfg, s, GainModel::gamma(64), rng);
    CHECK(res.ok());
    CHECK(res.power_w < urllc_closed_form_power(urllc_user(1e-12, 160.0), 4, cfg));
  }

  SUBCASE("urllc channel-hardened run lands on the closed form") {
    SystemConfig c = desk_cfg(32, 256);
    UserSpec u = urllc_user(1e-12, 160.0);
    RngStream rng(6);
    SolverConfig s = sol;
    s.residual_tol = 0.1;
    s.draws_per_iter = 256;
    auto res = sgd_min_power_urllc(u, 4, c, s, GainModel::gamma(256), rng);
    CHECK(res.ok());
    CHECK(res.power_w == doctest::Approx(urllc_closed_form_power(u, 4, c)).epsilon(0.05));
  }

  SUBCASE("growing packets need more power") {
    SystemConfig c = desk_cfg(32, 64);
    SolverConfig s = sol;
    s.residual_tol = 0.1;
    s.draws_per_iter = 256;
    RngStream ra(7), rb(7);
    auto p1 = sgd_min_power_urllc(urllc_user(1e-12, 160.0), 6, c, s, GainModel::gamma(64), ra);
    auto p2 = sgd_min_power_urllc(urllc_user(1e-12, 512.0), 6, c, s, GainModel::gamma(64), rb);
    CHECK(p1.ok());
    CHECK(p2.ok());
    CHECK(p2.power_w > p1.power_w);
  }

  SUBCASE("iterates stay projected at zero") {
    UserSpec u = tolerant_user(1e-2, 1.0);  // trivially satisfied demand
    RngStream rng(8);
    auto res = sgd_min_power_tolerant(u, 1, cfg, sol, GainModel::gamma(64), rng, 0.0);
    CHECK(res.power_w >= 0.0);
  }

  SUBCASE("dispatcher routes by service") {
    RngStream rng(9);
    UserSpec u = tolerant_user(1e-12, 0.0);
    CHECK(sgd_min_power(u, 1, cfg, sol, GainModel::gamma(64), rng).ok());
    CHECK_THROWS_AS(sgd_min_power_sensitive(u, 1, cfg, sol, GainModel::gamma(64), rng),
                    std::invalid_argument);
  }
}

TEST_CASE("bisection oracle") {
  SystemConfig cfg = desk_cfg();
  SolverConfig sol = fast_solver();

  SUBCASE("frozen gains agree with the closed forms to the bracket width") {
    SystemConfig c1 = cfg;
    c1.n_antennas = 1;
    GainModel frozen = GainModel::frozen(1.0);
    RngStream rng(11);
    UserSpec ut = tolerant_user(1e-12, 6e5);
    auto r1 = bisection_min_power(ut, 1, c1, sol, frozen, rng);
    CHECK(r1.ok());
    CHECK(r1.power_w ==
          doctest::Approx(frozen_gain_min_power(ut, 1, c1, 1.0)).epsilon(1e-6));

    UserSpec us = sensitive_user(1e-12, 100.0, 2000.0);
    auto r2 = bisection_min_power(us, 2, c1, sol, frozen, rng);
    CHECK(r2.power_w ==
          doctest::Approx(frozen_gain_min_power(us, 2, c1, 1.0)).epsilon(1e-6));

    UserSpec uu = urllc_user(1e-12, 160.0);
    auto r3 = bisection_min_power(uu, 4, c1, sol, frozen, rng);
    CHECK(r3.power_w ==
          doctest::Approx(frozen_gain_min_power(uu, 4, c1, 1.0)).epsilon(1e-6));
  }

  SUBCASE("SGD and bisection agree on random gamma channels") {
    RngStream inst(13);
    SolverConfig s = sol;
    s.residual_tol = 5e-3;
    for (int i = 0; i < 5; ++i) {
      double alpha = std::pow(10.0, -12.5 + 1.5 * inst.uniform());
      UserSpec u = tolerant_user(alpha, 4e5 + 4e5 * inst.uniform());
      int n = 1 + static_cast<int>(inst.uniform_int(6));
      RngStream ra = inst.fork(100 + i), rb = inst.fork(200 + i);
      auto sgd = sgd_min_power_tolerant(u, n, desk_cfg(), s, GainModel::gamma(64), ra);
      auto bis = bisection_min_power(u, n, desk_cfg(), s, GainModel::gamma(64), rb);
      REQUIRE(sgd.ok());
      REQUIRE(bis.ok());
      CHECK(sgd.power_w == doctest::Approx(bis.power_w).epsilon(0.02));
    }
  }

  SUBCASE("demand beyond the budget is flagged infeasible") {
    SystemConfig tiny = desk_cfg();
    tiny.p_max_w = 1e-9;
    UserSpec u = tolerant_user(1e-13, 8e5);
    RngStream rng(15);
    auto res = bisection_min_power(u, 1, tiny, sol, GainModel::gamma(64), rng);
    CHECK(res.status == SolveStatus::infeasible);
  }

  SUBCASE("deterministic given the stream seed") {
    UserSpec u = sensitive_user(1e-12, 300.0, 3000.0);
    RngStream a(16), b(16);
    auto r1 = bisection_min_power(u, 3, cfg, sol, GainModel::gamma(64), a);
    auto r2 = bisection_min_power(u, 3, cfg, sol, GainModel::gamma(64), b);
    CHECK(r1.power_w == r2.power_w);
  }
}

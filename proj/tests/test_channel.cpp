#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "raqos/channel.hpp"

using namespace raqos;

TEST_CASE("path loss matches the log-distance model") {
  ChannelParams p;
  // Direct evaluation of 35.3 + 37.6 log10(d).
  CHECK(pathloss_db(200.0, p) == doctest::Approx(35.3 + 37.6 * std::log10(200.0)).epsilon(1e-12));
  CHECK(pathloss_db(200.0, p) == doctest::Approx(121.8187).epsilon(1e-4));
  CHECK(pathloss_db(1.0, p) == doctest::Approx(35.3).epsilon(1e-12));
  CHECK_THROWS_AS(pathloss_db(0.0, p), std::invalid_argument);
}

TEST_CASE("large-scale gain: shadowing-free value, determinism, monotonicity") {
  ChannelParams p;
  SUBCASE("sigma=0 reproduces the pure path loss") {
    p.shadowing_sigma_db = 0.0;
    RngStream rng(3);
    double g = large_scale_gain(200.0, p, rng);
    CHECK(g == doctest::Approx(std::pow(10.0, -12.18187)).epsilon(1e-4));
  }
  SUBCASE("same seed, same distance, same gain") {
    RngStream a(42), b(42);
    CHECK(large_scale_gain(57.0, p, a) == large_scale_gain(57.0, p, b));
  }
  SUBCASE("monotone decreasing in distance with frozen shadowing") {
    p.shadowing_sigma_db = 0.0;
    RngStream rng(1);
    double prev = 1e9;
    for (double d = 10.0; d <= 200.0; d += 10.0) {
      double g = large_scale_gain(d, p, rng);
      CHECK(g < prev);
      prev = g;
    }
  }
  SUBCASE("invalid distances") {
    RngStream rng(1);
    CHECK_THROWS_AS(large_scale_gain(-1.0, p, rng), std::invalid_argument);
    CHECK_THROWS_AS(large_scale_gain(0.0, p, rng), std::invalid_argument);
    CHECK_THROWS_AS(large_scale_gain(201.0, p, rng), std::invalid_argument);
  }
}

TEST_CASE("small-scale gains are Gamma(N_T, 1)") {
  const int draws = 100000;
  SUBCASE("N_T = 1: unit-mean exponential") {
    RngStream rng(11);
    ChannelDraw d = sample_small_scale(1, draws, 1, rng);
    double mean = 0.0;
    for (double g : d.row(0)) mean += g;
    mean /= draws;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
  }
  SUBCASE("N_T = 64: mean and variance match the shape") {
    RngStream rng(12);
    ChannelDraw d = sample_small_scale(1, draws, 64, rng);
    double mean = 0.0, var = 0.0;
    for (double g : d.row(0)) mean += g;
    mean /= draws;
    for (double g : d.row(0)) var += (g - mean) * (g - mean);
    var /= draws;
    CHECK(mean == doctest::Approx(64.0).epsilon(0.02));
    CHECK(var == doctest::Approx(64.0).epsilon(0.05));
  }
  SUBCASE("degenerate inputs rejected") {
    RngStream rng(1);
    CHECK_THROWS_AS(sample_small_scale(1, 0, 4, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_small_scale(0, 10, 4, rng), std::invalid_argument);
  }
  SUBCASE("equal seeds give bit-identical draws") {
    RngStream a(5), b(5);
    ChannelDraw da = sample_small_scale(3, 100, 8, a);
    ChannelDraw db = sample_small_scale(3, 100, 8, b);
    CHECK(da.g == db.g);
  }
  SUBCASE("entries are nonnegative") {
    RngStream rng(9);
    ChannelDraw d = sample_small_scale(2, 1000, 4, rng);
    for (double g : d.g) CHECK(g >= 0.0);
  }
}

TEST_CASE("users are placed area-uniform on the disk") {
  RngStream rng(21);
  const int n = 50000;
  std::vector<double> d = place_users_uniform_disk(n, 200.0, rng);
  double mean_sq = 0.0;
  for (double x : d) {
    CHECK(x <= 200.0);
    CHECK(x >= 0.0);
    mean_sq += x * x;
  }
  mean_sq /= n;
  // E[d^2] = R^2 / 2 for an area-uniform disk.
  CHECK(mean_sq == doctest::Approx(200.0 * 200.0 / 2.0).epsilon(0.02));
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "helpers.hpp"
#include "raqos/neural.hpp"
#include "raqos/solver.hpp"

using namespace raqos;
using testutil::desk_cfg;
using testutil::tolerant_user;

namespace {

// Straight-line re-implementation of the forward pass, kept deliberately
// separate from the library code path.
std::vector<double> forward_oracle(const MlpModel& m, const std::vector<double>& x) {
  std::vector<double> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = (x[i] - m.norm_mean[i]) / m.norm_std[i];
  for (int l = 0; l < m.weight_layers(); ++l) {
    std::vector<double> z(m.layers[l + 1], 0.0);
    for (int r = 0; r < m.layers[l + 1]; ++r) {
      z[r] = m.b[l][r];
      for (int c = 0; c < m.layers[l]; ++c) z[r] += m.w[l].at(r, c) * a[c];
      if (l + 1 < m.weight_layers() && z[r] < 0.0) z[r] = 0.0;
    }
    a = z;
  }
  return a;
}

}  // namespace

TEST_CASE("forward pass") {
  SUBCASE("all-zero parameters give a zero output") {
    RngStream rng(1);
    MlpModel m = make_mlp({3, 4, 2}, MlpModel::Init::he, rng);
    for (auto& w : m.w) std::fill(w.a.begin(), w.a.end(), 0.0);
    for (auto& b : m.b) std::fill(b.begin(), b.end(), 0.0);
    auto y = forward(m, std::vector<double>{1.0, -2.0, 3.0});
    CHECK(y == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("identity weights pass nonnegative inputs through") {
    RngStream rng(2);
    MlpModel m = make_mlp({3, 3}, MlpModel::Init::he, rng);
    std::fill(m.w[0].a.begin(), m.w[0].a.end(), 0.0);
    for (int i = 0; i < 3; ++i) m.w[0].at(i, i) = 1.0;
    std::fill(m.b[0].begin(), m.b[0].end(), 0.0);
    std::vector<double> x{0.5, 0.0, 2.0};
    CHECK(forward(m, x) == x);
  }
  SUBCASE("random net equals the independent re-implementation") {
    RngStream rng(3);
    MlpModel m = make_mlp({3, 4, 2}, MlpModel::Init::he, rng);
    m.norm_mean = {0.1, -0.2, 0.3};
    m.norm_std = {1.5, 0.7, 2.0};
    std::vector<double> x{0.4, -1.1, 0.9};
    auto a = forward(m, x);
    auto b = forward_oracle(m, x);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  SUBCASE("width mismatch throws") {
    RngStream rng(4);
    MlpModel m = make_mlp({3, 2}, MlpModel::Init::he, rng);
    CHECK_THROWS_AS(forward(m, std::vector<double>{1.0}), std::invalid_argument);
  }
  SUBCASE("bias-free ReLU nets are positively homogeneous") {
    RngStream rng(5);
    MlpModel m = make_mlp({4, 6, 3}, MlpModel::Init::he, rng);
    for (auto& b : m.b) std::fill(b.begin(), b.end(), 0.0);
    std::vector<double> x{0.3, -0.7, 1.2, 0.1};
    std::vector<double> x3{0.9, -2.1, 3.6, 0.3};
    auto y1 = forward(m, x);
    auto y3 = forward(m, x3);
    for (std::size_t i = 0; i < y1.size(); ++i)
      CHECK(y3[i] == doctest::Approx(3.0 * y1[i]).epsilon(1e-12));
  }
}

TEST_CASE("log-mse loss") {
  SUBCASE("identity gives zero") {
    std::vector<double> v{1.0, 2.0, 3.0};
    CHECK(loss_log_mse(v, v) == 0.0);
  }
  SUBCASE("log1p unit example") {
    std::vector<double> pred{0.0};
    std::vector<double> label{std::exp(1.0) - 1.0};
    CHECK(loss_log_mse(pred, label) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("random batch matches a duplicate implementation") {
    RngStream rng(6);
    std::vector<double> p(12), l(12);
    for (auto& v : p) v = rng.uniform() * 5.0;
    for (auto& v : l) v = rng.uniform() * 5.0;
    double expect = 0.0;
    for (int i = 0; i < 12; ++i) {
      double d = std::log(1.0 + l[i]) - std::log(1.0 + p[i]);
      expect += d * d;
    }
    expect /= 12.0;
    CHECK(loss_log_mse(p, l) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("domain guard") {
    std::vector<double> p{-1.5};
    std::vector<double> l{0.0};
    CHECK_THROWS_AS(loss_log_mse(p, l), std::invalid_argument);
  }
}

TEST_CASE("backprop and Adam") {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;

  SUBCASE("perfect predictions are a fixed point") {
    RngStream rng(7);
    MlpModel m = make_mlp({2, 3, 1}, MlpModel::Init::he, rng);
    std::vector<std::vector<double>> xs{{0.5, 1.0}};
    std::vector<std::vector<double>> ys{forward(m, xs[0])};
    MlpModel before = m;
    AdamState st = make_adam_state(m);
    double loss = backward_and_adam_step(m, xs, ys, cfg, st);
    CHECK(loss == 0.0);
    for (int l = 0; l < m.weight_layers(); ++l) {
      CHECK(m.w[l].a == before.w[l].a);
      CHECK(m.b[l] == before.b[l]);
    }
  }

  SUBCASE("gradient matches central finite differences") {
    RngStream rng(8);
    MlpModel m = make_mlp({4, 6, 3}, MlpModel::Init::he, rng);
    std::vector<std::vector<double>> xs, ys;
    RngStream d(9);
    for (int i = 0; i < 8; ++i) {
      std::vector<double> x(4), y(3);
      for (auto& v : x) v = d.normal();
      for (auto& v : y) v = d.normal();
      xs.push_back(x);
      ys.push_back(y);
    }
    // After one Adam step from a zero state, the stored first moment is
    // (1-beta1) * g, so the bias-corrected moment recovers the gradient.
    MlpModel mc = m;
    AdamState st = make_adam_state(mc);
    TrainConfig probe_cfg = cfg;
    probe_cfg.learning_rate = 0.0;
    backward_and_adam_step(mc, xs, ys, probe_cfg, st);
    const double h = 1e-5;
    RngStream pick(10);
    for (int probe = 0; probe < 20; ++probe) {
      int l = static_cast<int>(pick.uniform_int(m.weight_layers()));
      int idx = static_cast<int>(pick.uniform_int(static_cast<uint32_t>(m.w[l].a.size())));
      double g_analytic = st.mw[l].a[idx] / (1.0 - probe_cfg.beta1);
      MlpModel mp = m, mm = m;
      mp.w[l].a[idx] += h;
      mm.w[l].a[idx] -= h;
      double fd = (mse_loss(mp, xs, ys) - mse_loss(mm, xs, ys)) / (2.0 * h);
      double denom = std::max({std::abs(g_analytic), std::abs(fd), 1e-8});
      CHECK(std::abs(g_analytic - fd) / denom < 1e-4);
    }
  }

  SUBCASE("training is bit-reproducible") {
    auto run = [] {
      RngStream rng(11);
      MlpModel m = make_mlp({3, 8, 2}, MlpModel::Init::he, rng);
      std::vector<std::vector<double>> xs, ys;
      RngStream d(12);
      for (int i = 0; i < 32; ++i) {
        std::vector<double> x(3), y(2);
        for (auto& v : x) v = d.normal();
        for (auto& v : y) v = d.normal();
        xs.push_back(x);
        ys.push_back(y);
      }
      TrainConfig c;
      c.epochs = 50;
      c.batch_size = 8;
      c.seed = 13;
      fit_mlp(m, xs, ys, c);
      return m;
    };
    MlpModel a = run(), b = run();
    for (int l = 0; l < a.weight_layers(); ++l) {
      CHECK(a.w[l].a == b.w[l].a);
      CHECK(a.b[l] == b.b[l]);
    }
  }

  SUBCASE("learning happens and small sets are memorized") {
    RngStream rng(14);
    MlpModel m = make_mlp({2, 32, 32, 1}, MlpModel::Init::he, rng);
    std::vector<std::vector<double>> xs, ys;
    RngStream d(15);
    for (int i = 0; i < 10; ++i) {
      std::vector<double> x{d.normal(), d.normal()};
      ys.push_back({std::sin(x[0]) + 0.5 * x[1]});
      xs.push_back(x);
    }
    TrainConfig c;
    c.epochs = 3000;
    c.batch_size = 10;
    c.seed = 16;
    std::vector<double> trace;
    fit_mlp(m, xs, ys, c, &trace);
    CHECK(trace.back() < trace.front());
    CHECK(mse_loss(m, xs, ys) < 1e-3);
  }
}

TEST_CASE("bandwidth quantization") {
  SUBCASE("integral inputs stay put") {
    std::vector<double> f{2.0, 3.0};
    CHECK(quantize_bandwidth(f, 10) == std::vector<int>{2, 3});
  }
  SUBCASE("repair decrements the most over-provisioned, lowest index keeps") {
    std::vector<double> f{2.6, 2.6};
    CHECK(quantize_bandwidth(f, 5) == std::vector<int>{3, 2});
  }
  SUBCASE("zeros stay zeros") {
    std::vector<double> f{0.0, 0.0, 0.0};
    CHECK(quantize_bandwidth(f, 4) == std::vector<int>{0, 0, 0});
  }
  SUBCASE("budget and nonnegativity always hold") {
    RngStream rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      int k = 1 + static_cast<int>(rng.uniform_int(8));
      int n_max = static_cast<int>(rng.uniform_int(20));
      std::vector<double> f(k);
      for (auto& v : f) v = rng.uniform() * 8.0 - 0.5;
      auto n = quantize_bandwidth(f, n_max);
      long sum = 0;
      for (int v : n) {
        CHECK(v >= 0);
        sum += v;
      }
      CHECK(sum <= n_max);
    }
  }
}

TEST_CASE("multiplication counts") {
  SUBCASE("formula on a known shape") {
    RngStream rng(18);
    MlpModel m = make_mlp({3, 4, 2}, MlpModel::Init::he, rng);
    CHECK(flop_count(m) == 20);
  }
  SUBCASE("matches the instrumented forward pass on random shapes") {
    RngStream rng(19);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<int> layers;
      int depth = 2 + static_cast<int>(rng.uniform_int(4));
      for (int l = 0; l < depth; ++l) layers.push_back(1 + static_cast<int>(rng.uniform_int(9)));
      MlpModel m = make_mlp(layers, MlpModel::Init::he, rng);
      std::vector<double> x(layers.front(), 0.3);
      std::size_t counted = 0;
      forward_instrumented(m, x, &counted);
      CHECK(counted == flop_count(m));
    }
  }
  SUBCASE("cascaded count adds one pass per service net") {
    RngStream rng(20);
    CascadedModel cm;
    cm.phi1 = make_mlp({12, 16, 6}, MlpModel::Init::he, rng);
    for (Service s : {Service::tolerant, Service::sensitive, Service::urllc})
      cm.phi2[s] = make_mlp({3, 20, 1}, MlpModel::Init::he, rng);
    CHECK(flop_count(cm) == flop_count(cm.phi1) + 3 * flop_count(cm.phi2[Service::tolerant]));
  }
}

TEST_CASE("model persistence round trip") {
  RngStream rng(21);
  CascadedModel cm;
  cm.phi1 = make_mlp({6, 9, 3}, MlpModel::Init::gauss, rng);
  cm.phi1.norm_mean = {1.0 / 3.0, -2.7, 0.0, 1e-12, 3.14159, -0.1};
  cm.phi1.norm_std = {2.0, 0.5, 1.0, 1e-6, 7.0, 0.3};
  cm.phi1.meta["kind"] = "phi1";
  cm.phi2[Service::urllc] = make_mlp({3, 5, 1}, MlpModel::Init::he, rng);
  cm.meta["note"] = "round_trip";

  std::ostringstream os;
  save_cascaded(os, cm);
  std::istringstream is(os.str());
  CascadedModel back = load_cascaded(is);

  CHECK(back.phi1.layers == cm.phi1.layers);
  CHECK(back.phi1.norm_mean == cm.phi1.norm_mean);
  CHECK(back.phi1.norm_std == cm.phi1.norm_std);
  for (int l = 0; l < cm.phi1.weight_layers(); ++l) {
    CHECK(back.phi1.w[l].a == cm.phi1.w[l].a);
    CHECK(back.phi1.b[l] == cm.phi1.b[l]);
  }
  CHECK(back.phi2.at(Service::urllc).w[0].a == cm.phi2.at(Service::urllc).w[0].a);
  CHECK(back.meta.at("note") == "round_trip");
  CHECK(back.phi1.init == MlpModel::Init::gauss);
  CHECK(model_digest(back) == model_digest(cm));

  std::ostringstream os2;
  save_cascaded(os2, back);
  CHECK(os2.str() == os.str());
}

TEST_CASE("cascaded power net learns the analytic curve on frozen gains") {
  SystemConfig cfg = desk_cfg(8);
  ScenarioTemplate tmpl{{Service::tolerant}};
  RngStream rng(22);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 400; ++i) {
    double alpha = std::pow(10.0, -12.5 + 1.5 * rng.uniform());
    double rate = 4e5 + 4e5 * rng.uniform();
    UserSpec u = tolerant_user(alpha, rate);
    int n_star = 1 + static_cast<int>(rng.uniform_int(8));
    TrainingSample s;
    s.x = {10.0 * std::log10(alpha), rate};
    s.n_star = {n_star};
    s.p_star = {frozen_gain_min_power(u, n_star, cfg, 64.0)};
    samples.push_back(s);
  }
  TrainConfig tc;
  tc.epochs = 12000;
  tc.seed = 23;
  CascadedModel cm = train_cascaded(samples, tmpl, {16, 16}, {20, 20, 20, 20}, tc);

  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const TrainingSample& s = samples[i];
    std::vector<double> in = {static_cast<double>(s.n_star[0]), s.x[0], s.x[1]};
    double pred = std::expm1(forward(cm.phi2.at(Service::tolerant), in)[0]) / 1000.0;
    double rel = std::abs(pred - s.p_star[0]) / s.p_star[0];
    worst = std::max(worst, rel);
  }
  CHECK(worst < 0.05);
}

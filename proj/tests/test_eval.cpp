#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "helpers.hpp"
#include "raqos/eval.hpp"

using namespace raqos;
using testutil::frozen_genspec;

namespace {

Dataset make_eval_dataset() {
  static Dataset ds = generate_dataset(frozen_genspec(ratio_template(3, 1, 1, 1), 30, 321));
  return ds;
}

std::vector<int> all_indices(const Dataset& ds) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(ds.records.size()); ++i)
    if (ds.records[i].feasible) idx.push_back(i);
  return idx;
}

}  // namespace

TEST_CASE("eta on the labels themselves is exactly one") {
  Dataset ds = make_eval_dataset();
  auto idx = all_indices(ds);
  REQUIRE(!idx.empty());
  CHECK(accuracy_eta(labels_predictor(), ds, idx) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("doubling the total power drives eta to zero") {
  Dataset ds = make_eval_dataset();
  auto idx = all_indices(ds);
  // Keep the optimal bandwidth but add enough transmit power to double the
  // total; the repair rule keeps over-provisioned powers as they are.
  Predictor doubler = [&ds](const DatasetRecord& rec) {
    PredictedAlloc a;
    a.n = rec.sample.n_star;
    a.p = rec.sample.p_star;
    double extra = ds.header.cfg.amp_efficiency * rec.opt_total_w;
    a.p[0] += extra;  // any active user works; slot 0 is always active here
    return a;
  };
  CHECK(accuracy_eta(doubler, ds, idx) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("violation curves") {
  Dataset ds = make_eval_dataset();
  auto idx = all_indices(ds);
  EvalConfig cfg;
  cfg.margin_axis_w = EvalConfig::default_grid(ds.header.cfg.p_max_w);
  REQUIRE(cfg.margin_axis_w.size() == 16);
  CHECK(cfg.margin_axis_w.front() == 0.0);
  CHECK(cfg.margin_axis_w.back() == doctest::Approx(0.15 * ds.header.cfg.p_max_w));

  SUBCASE("oracle predictions never violate") {
    auto curves = qos_violation_curve(labels_predictor(), ds, idx, cfg);
    REQUIRE(curves.size() == 3);
    for (const auto& c : curves)
      for (double v : c.violation) CHECK(v == 0.0);
  }

  SUBCASE("an under-powered predictor violates at zero margin, then recovers") {
    Predictor miser = [](const DatasetRecord& rec) {
      PredictedAlloc a;
      a.n = rec.sample.n_star;
      a.p = rec.sample.p_star;
      for (double& p : a.p) p *= 0.5;
      return a;
    };
    auto curves = qos_violation_curve(miser, ds, idx, cfg);
    for (const auto& c : curves) {
      CHECK(c.violation.front() > 0.0);
      for (std::size_t m = 1; m < c.violation.size(); ++m)
        CHECK(c.violation[m] <= c.violation[m - 1]);
    }
  }

  SUBCASE("an enormous margin absorbs everything") {
    Predictor zero = [](const DatasetRecord& rec) {
      PredictedAlloc a;
      a.n = rec.sample.n_star;
      a.p.assign(rec.users.size(), 0.0);
      return a;
    };
    EvalConfig wide = cfg;
    wide.margin_axis_w = {1e6};
    auto curves = qos_violation_curve(zero, ds, idx, wide);
    for (const auto& c : curves) CHECK(c.violation[0] == 0.0);
  }

  SUBCASE("empty inputs rejected") {
    CHECK_THROWS_AS(qos_violation_curve(labels_predictor(), ds, {}, cfg),
                    std::invalid_argument);
    EvalConfig empty;
    CHECK_THROWS_AS(qos_violation_curve(labels_predictor(), ds, idx, empty),
                    std::invalid_argument);
  }
}

TEST_CASE("power versus user count") {
  Dataset ds = make_eval_dataset();
  auto idx = all_indices(ds);
  auto rows = power_vs_users(labels_predictor(), ds, idx, {0, 1, 2, 3}, 4);
  REQUIRE(rows.size() == 4);
  // No users: the optimizer burns only the fixed circuit power.
  CHECK(rows[0].optimal_w == doctest::Approx(ds.header.cfg.p0_circuit_w).epsilon(1e-9));
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].optimal_w >= rows[i - 1].optimal_w - 1e-9);
  CHECK_THROWS_AS(power_vs_users(labels_predictor(), ds, idx, {4}, 2), std::invalid_argument);
}

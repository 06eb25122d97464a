#pragma once

#include <functional>
#include <vector>

#include "raqos/dataset.hpp"
#include "raqos/neural.hpp"

namespace raqos {

struct EvalConfig {
  std::vector<double> margin_axis_w;  // grid of Delta_P * K^xi values
  double p_req = 0.99;                // target guarantee probability
  int max_records = 0;                // 0: use every record given

  // 0 .. frac*p_max in `points` steps.
  static std::vector<double> default_grid(double p_max_w, int points = 16, double frac = 0.15);
};

using Predictor = std::function<PredictedAlloc(const DatasetRecord&)>;

Predictor cascaded_predictor(const CascadedModel& m, const ScenarioTemplate& tmpl, int n_max,
                             double p_cap_w = 1e30);
Predictor fnn_predictor(const MlpModel& m, const ScenarioTemplate& tmpl, int n_max,
                        double p_cap_w = 1e30);
Predictor labels_predictor();  // feeds the optimal labels back; the oracle baseline

// Required transmit power of user k at bandwidth n, read from the record's
// cached curve. Zero bandwidth of an active user can satisfy nothing.
double required_power(const DatasetRecord& rec, int user, int n);

// Mean accuracy eta = 1 - (P_tot(pred) - P_tot(opt)) / P_tot(opt) over the
// records. Predictions below the required power are repaired to it before
// costing, so under-powering is charged at its true price and bandwidth
// mistakes keep their circuit cost.
double accuracy_eta(const Predictor& pred, const Dataset& ds, const std::vector<int>& idx,
                    const EvalConfig& cfg = {});

struct ViolationCurve {
  Service service = Service::tolerant;
  int users = 0;                      // K^xi
  std::vector<double> margin_axis_w;  // Delta_P * K^xi
  std::vector<double> violation;     // P{pred + Delta_P < required}
};

// Per-service probability of missing the QoS guarantee versus the reserved
// power margin; nonincreasing in the margin by construction.
std::vector<ViolationCurve> qos_violation_curve(const Predictor& pred, const Dataset& ds,
                                                const std::vector<int>& idx,
                                                const EvalConfig& cfg);

struct PowerVsUsersRow {
  int k = 0;
  double optimal_w = 0.0;
  double model_w = 0.0;
};

// Training with seed selection: candidate seeds are scored by eta on a
// validation slice carved from the back of the training records, the best
// model wins. Small nets land in minima of very different quality, and the
// accuracy metric is tail-sensitive, so a handful of restarts buys a lot.
struct SelectedModel {
  CascadedModel model;
  double val_eta = 0.0;
  std::uint64_t seed = 0;
};
SelectedModel train_selected(const Dataset& ds, bool fnn, const std::vector<int>& hidden1,
                             const std::vector<int>& hidden2, const TrainConfig& cfg,
                             int n_seeds);

// Optimal and predicted total power as the first k slots stay active and the
// rest are padded with zero demand.
std::vector<PowerVsUsersRow> power_vs_users(const Predictor& pred, const Dataset& ds,
                                            const std::vector<int>& idx,
                                            const std::vector<int>& k_values, int max_records = 8);

}  // namespace raqos

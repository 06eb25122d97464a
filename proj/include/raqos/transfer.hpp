#pragma once

#include <functional>
#include <map>
#include <vector>

#include "raqos/neural.hpp"

namespace raqos {

// How much of a pre-trained model is reused. phi1_frozen_layers = -1 freezes
// every hidden layer of phi_I except the last one, the default depth used
// throughout; 0 fine-tunes everything.
struct TransferPlan {
  int phi1_frozen_layers = -1;
  bool fresh_phi2 = false;   // retargeting trains the target power net from scratch
  int head_layers = 2;       // stacked net: replaced top layers of phi_I
  bool online_mode = false;  // one new labeled sample becomes available per epoch
  int metric_stride = 1;     // evaluate the accuracy metric every this many epochs
  TrainConfig tune;
};

// Held-out accuracy callback, evaluated once per epoch; may be empty.
using Metric = std::function<double(const CascadedModel&)>;

struct FineTuneResult {
  CascadedModel model;
  std::vector<double> eta_trace;  // entry i is the accuracy after i*stride epochs
  int metric_stride = 1;
};

int resolve_frozen_layers(const MlpModel& phi1, int requested);  // throws on a full freeze

// Fine-tune a pre-trained cascade on target-domain samples: the first layers
// of phi_I stay fixed, the rest of phi_I and all layers of every phi_II move.
FineTuneResult fine_tune(const CascadedModel& source, const TransferPlan& plan,
                         const std::vector<TrainingSample>& samples,
                         const ScenarioTemplate& tmpl, const Metric& metric = {});

// Reuse a cascade trained on one service for another: phi_I trunk frozen,
// remaining phi_I layers tuned, and a fresh phi_II for the target service.
FineTuneResult retarget_service(const CascadedModel& source, Service target,
                                const TransferPlan& plan,
                                const std::vector<TrainingSample>& samples,
                                const ScenarioTemplate& tmpl, const Metric& metric = {});

// Stack per-service phi_I nets into one multi-service net: the early layers
// of each source run in parallel on their own service's features and a fresh
// joint head outputs all users' bandwidth; phi_II nets are reused unchanged.
FineTuneResult stack_multi_service(const std::map<Service, CascadedModel>& sources,
                                   const TransferPlan& plan,
                                   const std::vector<TrainingSample>& samples,
                                   const ScenarioTemplate& tmpl, const Metric& metric = {});

}  // namespace raqos

#include "raqos/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace raqos {

int resolve_frozen_layers(const MlpModel& phi1, int requested) {
  int lw = phi1.weight_layers();
  int frozen = requested < 0 ? std::max(0, lw - 2) : requested;
  if (frozen >= lw)
    throw std::invalid_argument("transfer plan freezes every layer; nothing can train");
  return frozen;
}

namespace {

std::vector<char> freeze_mask(int total, int frozen) {
  std::vector<char> m(total, 0);
  for (int l = 0; l < frozen; ++l) m[l] = 1;
  return m;
}

// Common fine-tuning loop. Each epoch takes one Adam step on phi_I (honoring
// the freeze mask) and, when train_phi2 is set, one step per power net.
FineTuneResult tune_loop(CascadedModel model, const TransferPlan& plan,
                         const std::vector<TrainingSample>& samples,
                         const ScenarioTemplate& tmpl, const Metric& metric, bool train_phi2) {
  if (samples.empty()) throw std::invalid_argument("need target-domain samples");
  const TrainConfig& cfg = plan.tune;
  std::vector<char> mask = freeze_mask(model.phi1.weight_layers(),
                                       resolve_frozen_layers(model.phi1, plan.phi1_frozen_layers));

  std::vector<std::vector<double>> x1, y1;
  phi1_training_arrays(samples, tmpl, x1, y1);
  std::map<Service, std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>>>
      tuples;
  if (train_phi2)
    for (Service svc : tmpl.present_types()) {
      auto& [xs, ys] = tuples[svc];
      phi2_training_arrays(samples, tmpl, svc, xs, ys);
    }

  AdamState s1 = make_adam_state(model.phi1);
  std::map<Service, AdamState> s2;
  for (auto& [svc, net] : model.phi2) s2.emplace(svc, make_adam_state(net));

  FineTuneResult out;
  out.metric_stride = std::max(1, plan.metric_stride);
  out.eta_trace.push_back(metric ? metric(model) : 0.0);

  RngStream rng(cfg.seed);
  std::vector<std::vector<double>> bx, by;
  auto step = [&](MlpModel& net, AdamState& st, const std::vector<std::vector<double>>& xs,
                  const std::vector<std::vector<double>>& ys, const std::vector<char>* frz,
                  int avail) {
    if (xs.empty()) return;
    int limit = plan.online_mode ? std::min<int>(avail, static_cast<int>(xs.size()))
                                 : static_cast<int>(xs.size());
    if (limit < 1) return;
    int batch = std::min(cfg.batch_size, limit);
    bx.resize(batch);
    by.resize(batch);
    for (int i = 0; i < batch; ++i) {
      int idx = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(limit)));
      bx[i] = xs[idx];
      by[i] = ys[idx];
    }
    backward_and_adam_step(net, bx, by, cfg, st, frz);
  };

  for (int e = 1; e <= cfg.epochs; ++e) {
    // Online mode: one fresh labeled sample becomes available per epoch.
    int avail = e;
    step(model.phi1, s1, x1, y1, &mask, avail);
    if (train_phi2)
      for (auto& [svc, net] : model.phi2) {
        auto it = tuples.find(svc);
        if (it == tuples.end()) continue;
        // Per-sample tuple count scales with the slots of this service.
        int tuple_avail = avail * std::max(1, tmpl.count(svc));
        step(net, s2.at(svc), it->second.first, it->second.second, nullptr, tuple_avail);
      }
    if (e % out.metric_stride == 0 || e == cfg.epochs)
      out.eta_trace.push_back(metric ? metric(model) : 0.0);
  }
  out.model = std::move(model);
  return out;
}

std::vector<int> hidden_of(const MlpModel& m) {
  return std::vector<int>(m.layers.begin() + 1, m.layers.end() - 1);
}

}  // namespace

FineTuneResult fine_tune(const CascadedModel& source, const TransferPlan& plan,
                         const std::vector<TrainingSample>& samples,
                         const ScenarioTemplate& tmpl, const Metric& metric) {
  CascadedModel model = source;
  model.meta["transfer"] = "fine_tune";
  model.meta["source_digest"] = model_digest(source);
  return tune_loop(std::move(model), plan, samples, tmpl, metric, /*train_phi2=*/true);
}

FineTuneResult retarget_service(const CascadedModel& source, Service target,
                                const TransferPlan& plan,
                                const std::vector<TrainingSample>& samples,
                                const ScenarioTemplate& tmpl, const Metric& metric) {
  CascadedModel model = source;
  model.meta["transfer"] = std::string("retarget_") + service_name(target);
  model.meta["source_digest"] = model_digest(source);

  if (plan.fresh_phi2 || model.phi2.find(target) == model.phi2.end()) {
    std::vector<int> hidden = {20, 20, 20, 20};
    if (!source.phi2.empty()) hidden = hidden_of(source.phi2.begin()->second);
    RngStream rng = RngStream(plan.tune.seed).fork(2000 + static_cast<int>(target));
    std::vector<int> layers;
    layers.push_back(3);
    layers.insert(layers.end(), hidden.begin(), hidden.end());
    layers.push_back(1);
    MlpModel net = make_mlp(layers, plan.tune.init, rng);
    std::vector<std::vector<double>> xs, ys;
    phi2_training_arrays(samples, tmpl, target, xs, ys);
    if (!xs.empty()) {
      // Normalization from the target tuples; the net itself starts fresh.
      std::vector<double> mean(3, 0.0), var(3, 0.0);
      for (const auto& x : xs)
        for (int i = 0; i < 3; ++i) mean[i] += x[i];
      for (int i = 0; i < 3; ++i) mean[i] /= static_cast<double>(xs.size());
      for (const auto& x : xs)
        for (int i = 0; i < 3; ++i) var[i] += (x[i] - mean[i]) * (x[i] - mean[i]);
      for (int i = 0; i < 3; ++i) {
        double sd = std::sqrt(var[i] / static_cast<double>(xs.size()));
        net.norm_mean[i] = mean[i];
        net.norm_std[i] = sd > 1e-12 ? sd : 1.0;
      }
    }
    net.meta["kind"] = std::string("phi2_") + service_name(target);
    model.phi2[target] = std::move(net);
  }
  return tune_loop(std::move(model), plan, samples, tmpl, metric, /*train_phi2=*/true);
}

FineTuneResult stack_multi_service(const std::map<Service, CascadedModel>& sources,
                                   const TransferPlan& plan,
                                   const std::vector<TrainingSample>& samples,
                                   const ScenarioTemplate& tmpl, const Metric& metric) {
  std::vector<Service> types = tmpl.present_types();
  if (types.empty()) throw std::invalid_argument("template has no services");
  for (Service svc : types)
    if (sources.find(svc) == sources.end())
      throw std::invalid_argument(std::string("missing source model for service ") +
                                  service_name(svc));

  const int K = tmpl.width();
  const MlpModel& ref = sources.at(types.front()).phi1;
  const int lw = ref.weight_layers();
  if (plan.head_layers < 1 || plan.head_layers >= lw)
    throw std::invalid_argument("head depth must be in [1, layers)");
  const int trunk_layers = lw - plan.head_layers;

  for (Service svc : types) {
    const MlpModel& p = sources.at(svc).phi1;
    if (p.input_dim() != 2 * K || p.weight_layers() != lw ||
        !std::equal(p.layers.begin(), p.layers.begin() + trunk_layers + 1, ref.layers.begin()))
      throw std::invalid_argument("source bandwidth nets must share input width and trunk shape");
  }

  // Stacked phi_I: per-service trunks run side by side as block-diagonal
  // layers. Input normalization of each source is folded into its first
  // block. Features of other services' slots are masked off, which pins them
  // at the source's feature mean and keeps each trunk inside the input
  // distribution it was trained on.
  CascadedModel model;
  std::vector<int> layers(1, 2 * K);
  for (int t = 1; t <= trunk_layers; ++t)
    layers.push_back(ref.layers[t] * static_cast<int>(types.size()));
  for (int t = trunk_layers + 1; t < lw; ++t) layers.push_back(ref.layers[t]);
  layers.push_back(K);

  RngStream rng = RngStream(plan.tune.seed).fork(3000);
  model.phi1 = make_mlp(layers, plan.tune.init, rng);

  for (int l = 0; l < trunk_layers; ++l) {
    Matrix& w = model.phi1.w[l];
    std::fill(w.a.begin(), w.a.end(), 0.0);
    std::fill(model.phi1.b[l].begin(), model.phi1.b[l].end(), 0.0);
    int row_off = 0, col_off = 0;
    for (Service svc : types) {
      const MlpModel& src = sources.at(svc).phi1;
      const Matrix& sw = src.w[l];
      for (int r = 0; r < sw.rows; ++r) {
        double bias = src.b[l][r];
        for (int c = 0; c < sw.cols; ++c) {
          if (l == 0) {
            int slot = c % K;  // feature c belongs to user slot c mod K
            if (tmpl.slots[slot] != svc) continue;
            double scale = 1.0 / src.norm_std[c];
            w.at(row_off + r, c) = sw.at(r, c) * scale;
            bias -= sw.at(r, c) * src.norm_mean[c] * scale;
          } else {
            w.at(row_off + r, col_off + c) = sw.at(r, c);
          }
        }
        model.phi1.b[l][row_off + r] = bias;
      }
      row_off += sw.rows;
      col_off += sw.cols;
    }
  }
  model.phi1.meta["kind"] = "phi1_stacked";

  for (Service svc : types) {
    auto it = sources.at(svc).phi2.find(svc);
    if (it == sources.at(svc).phi2.end())
      throw std::invalid_argument(std::string("source model for ") + service_name(svc) +
                                  " lacks its power net");
    model.phi2[svc] = it->second;
  }
  model.meta["transfer"] = "stacked";

  TransferPlan p2 = plan;
  if (p2.phi1_frozen_layers < 0) p2.phi1_frozen_layers = trunk_layers;
  // Power nets come over from the source tasks unchanged.
  return tune_loop(std::move(model), p2, samples, tmpl, metric, /*train_phi2=*/false);
}

}  // namespace raqos

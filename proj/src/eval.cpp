#include "raqos/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace raqos {

std::vector<double> EvalConfig::default_grid(double p_max_w, int points, double frac) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i)
    g[i] = frac * p_max_w * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

Predictor cascaded_predictor(const CascadedModel& m, const ScenarioTemplate& tmpl, int n_max,
                             double p_cap_w) {
  return [m, tmpl, n_max, p_cap_w](const DatasetRecord& rec) {
    return predict_cascaded(m, tmpl, rec.sample.x, n_max, p_cap_w);
  };
}

Predictor fnn_predictor(const MlpModel& m, const ScenarioTemplate& tmpl, int n_max,
                        double p_cap_w) {
  return [m, tmpl, n_max, p_cap_w](const DatasetRecord& rec) {
    return predict_fnn(m, tmpl, rec.sample.x, n_max, p_cap_w);
  };
}

Predictor labels_predictor() {
  return [](const DatasetRecord& rec) {
    PredictedAlloc a;
    a.n = rec.sample.n_star;
    a.p = rec.sample.p_star;
    return a;
  };
}

double required_power(const DatasetRecord& rec, int user, int n) {
  bool active = user < static_cast<int>(rec.users.size()) && rec.users[user].active();
  if (!active) return 0.0;
  if (n <= 0) return std::numeric_limits<double>::infinity();
  const auto& curve = rec.p_req_w[user];
  if (curve.empty()) return std::numeric_limits<double>::infinity();
  int idx = std::min<int>(n, static_cast<int>(curve.size())) - 1;
  return curve[idx];
}

namespace {

int limit_count(std::size_t n, int max_records) {
  return max_records > 0 ? std::min<int>(static_cast<int>(n), max_records)
                         : static_cast<int>(n);
}

double repaired_total(const DatasetRecord& rec, const PredictedAlloc& a,
                      const SystemConfig& cfg) {
  double sum_p = 0.0;
  int sum_n = 0;
  for (std::size_t k = 0; k < rec.users.size(); ++k) {
    if (!rec.users[k].active()) continue;
    double need = required_power(rec, static_cast<int>(k), a.n[k]);
    if (std::isinf(need)) {
      // No bandwidth at all: charge the single-subcarrier requirement.
      need = required_power(rec, static_cast<int>(k), 1);
      sum_n += 1;
      sum_p += std::max(a.p[k], need);
      continue;
    }
    sum_n += a.n[k];
    sum_p += std::max(a.p[k], need);
  }
  return total_power(sum_p, sum_n, cfg);
}

}  // namespace

double accuracy_eta(const Predictor& pred, const Dataset& ds, const std::vector<int>& idx,
                    const EvalConfig& cfg) {
  if (idx.empty()) throw std::invalid_argument("empty evaluation set");
  int count = limit_count(idx.size(), cfg.max_records);
  double acc = 0.0;
  int used = 0;
  for (int i = 0; i < count; ++i) {
    const DatasetRecord& rec = ds.records[idx[i]];
    if (!rec.feasible) continue;
    PredictedAlloc a = pred(rec);
    double ptot = repaired_total(rec, a, ds.header.cfg);
    acc += 1.0 - (ptot - rec.opt_total_w) / rec.opt_total_w;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("no feasible records to evaluate");
  return acc / static_cast<double>(used);
}

std::vector<ViolationCurve> qos_violation_curve(const Predictor& pred, const Dataset& ds,
                                                const std::vector<int>& idx,
                                                const EvalConfig& cfg) {
  if (idx.empty()) throw std::invalid_argument("empty evaluation set");
  if (cfg.margin_axis_w.empty()) throw std::invalid_argument("empty margin grid");
  const ScenarioTemplate& tmpl = ds.header.tmpl;

  std::vector<ViolationCurve> curves;
  for (Service svc : tmpl.present_types()) {
    ViolationCurve c;
    c.service = svc;
    c.users = tmpl.count(svc);
    c.margin_axis_w = cfg.margin_axis_w;
    c.violation.assign(cfg.margin_axis_w.size(), 0.0);
    curves.push_back(c);
  }

  int count = limit_count(idx.size(), cfg.max_records);
  std::vector<long> totals(curves.size(), 0);
  for (int i = 0; i < count; ++i) {
    const DatasetRecord& rec = ds.records[idx[i]];
    if (!rec.feasible) continue;
    PredictedAlloc a = pred(rec);
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
      ViolationCurve& c = curves[ci];
      for (int k = 0; k < tmpl.width(); ++k) {
        if (tmpl.slots[k] != c.service || !rec.users[k].active()) continue;
        totals[ci] += 1;
        double need = required_power(rec, k, a.n[k]);
        for (std::size_t m = 0; m < c.margin_axis_w.size(); ++m) {
          double delta = c.margin_axis_w[m] / static_cast<double>(c.users);
          if (a.p[k] + delta < need) c.violation[m] += 1.0;
        }
      }
    }
  }
  for (std::size_t ci = 0; ci < curves.size(); ++ci)
    if (totals[ci] > 0)
      for (double& v : curves[ci].violation) v /= static_cast<double>(totals[ci]);
  return curves;
}

SelectedModel train_selected(const Dataset& ds, bool fnn, const std::vector<int>& hidden1,
                             const std::vector<int>& hidden2, const TrainConfig& cfg,
                             int n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("need at least one candidate seed");
  auto [train_idx, test_idx] = ds.split_indices();
  if (train_idx.empty()) throw std::invalid_argument("dataset has no feasible training records");
  // Fit on the front 8/9 of the training records, validate on the back 1/9.
  std::size_t cut = train_idx.size() * 8 / 9;
  if (cut == 0) cut = train_idx.size();
  std::vector<TrainingSample> fit;
  std::vector<int> val;
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    if (i < cut)
      fit.push_back(ds.records[train_idx[i]].sample);
    else
      val.push_back(train_idx[i]);
  }
  if (val.empty()) val = test_idx;

  SelectedModel best;
  best.val_eta = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_seeds; ++s) {
    TrainConfig tc = cfg;
    tc.seed = cfg.seed + 1000ULL * static_cast<std::uint64_t>(s);
    CascadedModel candidate;
    if (fnn) {
      candidate.phi1 = train_fnn(fit, ds.header.tmpl, hidden1, tc);
      candidate.meta["model"] = "fnn";
    } else {
      candidate = train_cascaded(fit, ds.header.tmpl, hidden1, hidden2, tc);
      candidate.meta["model"] = "cascaded";
    }
    Predictor pred = fnn ? fnn_predictor(candidate.phi1, ds.header.tmpl, ds.header.cfg.n_max,
                                         ds.header.cfg.p_max_w)
                         : cascaded_predictor(candidate, ds.header.tmpl, ds.header.cfg.n_max,
                                              ds.header.cfg.p_max_w);
    double eta = accuracy_eta(pred, ds, val);
    if (eta > best.val_eta) {
      best.val_eta = eta;
      best.seed = tc.seed;
      best.model = std::move(candidate);
    }
  }
  best.model.meta["cfg_digest"] = ds.header.cfg_digest;
  best.model.meta["selected_seed"] = std::to_string(best.seed);
  return best;
}

std::vector<PowerVsUsersRow> power_vs_users(const Predictor& pred, const Dataset& ds,
                                            const std::vector<int>& idx,
                                            const std::vector<int>& k_values, int max_records) {
  const ScenarioTemplate& tmpl = ds.header.tmpl;
  const int width = tmpl.width();
  for (int k : k_values)
    if (k < 0 || k > width) throw std::invalid_argument("user count exceeds the trained width");

  std::vector<PowerVsUsersRow> rows;
  int count = limit_count(idx.size(), max_records);
  for (int kv : k_values) {
    PowerVsUsersRow row;
    row.k = kv;
    int used = 0;
    for (int i = 0; i < count; ++i) {
      const DatasetRecord& rec = ds.records[idx[i]];
      if (!rec.feasible) continue;

      DatasetRecord padded = rec;
      for (int k = kv; k < width; ++k) {
        UserSpec& u = padded.users[k];
        switch (u.service) {
          case Service::tolerant: u.traffic = TolerantTraffic{0.0}; break;
          case Service::sensitive: u.traffic = SensitiveTraffic{}; break;
          case Service::urllc: u.traffic = UrllcTraffic{}; break;
        }
        padded.sample.x[width + k] = 0.0;
      }

      Scenario scn{padded.users, ds.header.cfg};
      std::optional<std::vector<double>> frozen;
      if (ds.header.frozen_gain)
        frozen = std::vector<double>(width, static_cast<double>(ds.header.cfg.n_antennas));
      PowerCache cache(scn, ds.header.frozen_gain ? 1 : ds.header.label_draws,
                       mix64(rec.seed ^ static_cast<std::uint64_t>(kv)), frozen);
      AllocationResult opt = greedy_min_total(scn, cache);
      row.optimal_w += opt.total_power_w;

      PredictedAlloc a = pred(padded);
      row.model_w += repaired_total(padded, a, ds.header.cfg);
      ++used;
    }
    if (used > 0) {
      row.optimal_w /= static_cast<double>(used);
      row.model_w /= static_cast<double>(used);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace raqos

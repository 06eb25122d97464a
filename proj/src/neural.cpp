#include "raqos/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace raqos {

namespace {

// Powers enter the log1p training targets in milliwatts; watt-scale values at
// desk size would sit in the linear region of log1p and lose all relative
// resolution.
constexpr double kMwPerW = 1000.0;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w.size(); ++l)
    n += w[l].a.size() + b[l].size();
  return n;
}

MlpModel make_mlp(const std::vector<int>& layers, MlpModel::Init init, RngStream& rng) {
  if (layers.size() < 2) throw std::invalid_argument("need at least input and output layer");
  for (int n : layers)
    if (n < 1) throw std::invalid_argument("layer sizes must be >= 1");
  MlpModel m;
  m.layers = layers;
  m.init = init;
  m.norm_mean.assign(layers.front(), 0.0);
  m.norm_std.assign(layers.front(), 1.0);
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Matrix w(layers[l + 1], layers[l]);
    std::vector<double> b(layers[l + 1], 0.0);
    double scale = init == MlpModel::Init::gauss ? 1.0 : std::sqrt(2.0 / layers[l]);
    for (double& v : w.a) v = scale * rng.normal();
    if (init == MlpModel::Init::gauss)
      for (double& v : b) v = rng.normal();
    m.w.push_back(std::move(w));
    m.b.push_back(std::move(b));
  }
  return m;
}

namespace {

void check_input(const MlpModel& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.input_dim())
    throw std::invalid_argument("input width mismatch");
}

std::vector<double> normalize(const MlpModel& m, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] - m.norm_mean[i]) / m.norm_std[i];
  return a;
}

}  // namespace

std::vector<double> forward(const MlpModel& m, std::span<const double> x) {
  return forward_instrumented(m, x, nullptr);
}

std::vector<double> forward_instrumented(const MlpModel& m, std::span<const double> x,
                                         std::size_t* mult_count) {
  check_input(m, x);
  std::vector<double> a = normalize(m, x);
  for (int l = 0; l < m.weight_layers(); ++l) {
    const Matrix& w = m.w[l];
    std::vector<double> z(w.rows);
    for (int r = 0; r < w.rows; ++r) {
      double acc = m.b[l][r];
      const double* wr = w.a.data() + static_cast<std::size_t>(r) * w.cols;
      for (int c = 0; c < w.cols; ++c) acc += wr[c] * a[c];
      z[r] = acc;
    }
    if (mult_count) *mult_count += static_cast<std::size_t>(w.rows) * w.cols;
    if (l + 1 < m.weight_layers())
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    a = std::move(z);
  }
  return a;
}

double loss_log_mse(std::span<const double> pred, std::span<const double> label) {
  if (pred.size() != label.size() || pred.empty())
    throw std::invalid_argument("prediction and label widths must match");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] <= -1.0 || label[i] <= -1.0)
      throw std::invalid_argument("log1p loss needs entries > -1");
    double d = std::log1p(label[i]) - std::log1p(pred[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

AdamState make_adam_state(const MlpModel& m) {
  AdamState s;
  for (int l = 0; l < m.weight_layers(); ++l) {
    s.mw.emplace_back(m.w[l].rows, m.w[l].cols);
    s.vw.emplace_back(m.w[l].rows, m.w[l].cols);
    s.mb.emplace_back(m.b[l].size(), 0.0);
    s.vb.emplace_back(m.b[l].size(), 0.0);
  }
  return s;
}

double mse_loss(const MlpModel& m, const std::vector<std::vector<double>>& xs,
                const std::vector<std::vector<double>>& ys) {
  if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("bad batch");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<double> y = forward(m, xs[i]);
    for (std::size_t j = 0; j < y.size(); ++j) {
      double d = y[j] - ys[i][j];
      acc += d * d;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

double backward_and_adam_step(MlpModel& m, const std::vector<std::vector<double>>& xs,
                              const std::vector<std::vector<double>>& ys,
                              const TrainConfig& cfg, AdamState& state,
                              const std::vector<char>* frozen) {
  if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("bad batch");
  const int L = m.weight_layers();
  if (frozen && static_cast<int>(frozen->size()) != L)
    throw std::invalid_argument("freeze mask size mismatch");

  std::vector<Matrix> gw;
  std::vector<std::vector<double>> gb;
  for (int l = 0; l < L; ++l) {
    gw.emplace_back(m.w[l].rows, m.w[l].cols);
    gb.emplace_back(m.b[l].size(), 0.0);
  }

  const double denom = static_cast<double>(xs.size()) * m.output_dim();
  double loss = 0.0;

  std::vector<std::vector<double>> act(L + 1);  // post-activation per layer
  for (std::size_t s = 0; s < xs.size(); ++s) {
    check_input(m, xs[s]);
    act[0] = normalize(m, xs[s]);
    for (int l = 0; l < L; ++l) {
      const Matrix& w = m.w[l];
      act[l + 1].assign(w.rows, 0.0);
      for (int r = 0; r < w.rows; ++r) {
        double accum = m.b[l][r];
        const double* wr = w.a.data() + static_cast<std::size_t>(r) * w.cols;
        for (int c = 0; c < w.cols; ++c) accum += wr[c] * act[l][c];
        act[l + 1][r] = (l + 1 < L && accum < 0.0) ? 0.0 : accum;
      }
    }

    std::vector<double> delta(m.output_dim());
    for (int j = 0; j < m.output_dim(); ++j) {
      double d = act[L][j] - ys[s][j];
      loss += d * d;
      delta[j] = 2.0 * d / denom;
    }

    for (int l = L - 1; l >= 0; --l) {
      const Matrix& w = m.w[l];
      for (int r = 0; r < w.rows; ++r) {
        double dr = delta[r];
        if (dr == 0.0) continue;
        gb[l][r] += dr;
        double* gr = gw[l].a.data() + static_cast<std::size_t>(r) * w.cols;
        for (int c = 0; c < w.cols; ++c) gr[c] += dr * act[l][c];
      }
      if (l == 0) break;
      std::vector<double> prev(w.cols, 0.0);
      for (int r = 0; r < w.rows; ++r) {
        double dr = delta[r];
        if (dr == 0.0) continue;
        const double* wr = w.a.data() + static_cast<std::size_t>(r) * w.cols;
        for (int c = 0; c < w.cols; ++c) prev[c] += dr * wr[c];
      }
      // ReLU gate of the previous layer.
      for (int c = 0; c < w.cols; ++c)
        if (act[l][c] <= 0.0) prev[c] = 0.0;
      delta = std::move(prev);
    }
  }
  loss /= denom;
  if (!std::isfinite(loss)) throw std::runtime_error("training diverged: non-finite loss");

  state.step += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (int l = 0; l < L; ++l) {
    if (frozen && (*frozen)[l]) continue;
    for (std::size_t i = 0; i < m.w[l].a.size(); ++i) {
      double g = gw[l].a[i];
      if (!std::isfinite(g)) throw std::runtime_error("training diverged: non-finite gradient");
      double& mm = state.mw[l].a[i];
      double& vv = state.vw[l].a[i];
      mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * g;
      vv = cfg.beta2 * vv + (1.0 - cfg.beta2) * g * g;
      m.w[l].a[i] -= cfg.learning_rate * (mm / bc1) / (std::sqrt(vv / bc2) + cfg.adam_eps);
    }
    for (std::size_t i = 0; i < m.b[l].size(); ++i) {
      double g = gb[l][i];
      if (!std::isfinite(g)) throw std::runtime_error("training diverged: non-finite gradient");
      double& mm = state.mb[l][i];
      double& vv = state.vb[l][i];
      mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * g;
      vv = cfg.beta2 * vv + (1.0 - cfg.beta2) * g * g;
      m.b[l][i] -= cfg.learning_rate * (mm / bc1) / (std::sqrt(vv / bc2) + cfg.adam_eps);
    }
  }
  return loss;
}

void fit_mlp(MlpModel& m, const std::vector<std::vector<double>>& xs,
             const std::vector<std::vector<double>>& ys, const TrainConfig& cfg,
             std::vector<double>* loss_trace, const std::vector<char>* frozen) {
  if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("bad training set");
  AdamState state = make_adam_state(m);
  RngStream rng(cfg.seed);
  int batch = std::min<int>(cfg.batch_size, static_cast<int>(xs.size()));
  std::vector<std::vector<double>> bx(batch), by(batch);
  TrainConfig step_cfg = cfg;

  int avg_from = cfg.epochs;
  if (cfg.weight_avg_tail > 0.0)
    avg_from = cfg.epochs - static_cast<int>(cfg.weight_avg_tail * cfg.epochs);
  MlpModel avg = m;
  long avg_count = 0;

  for (int e = 0; e < cfg.epochs; ++e) {
    // Stepwise decay: full rate for the first 60%, then 0.3x, then 0.1x.
    double frac = static_cast<double>(e) / std::max(1, cfg.epochs);
    step_cfg.learning_rate = cfg.learning_rate * (frac < 0.6 ? 1.0 : frac < 0.85 ? 0.3 : 0.1);
    for (int i = 0; i < batch; ++i) {
      int idx = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(xs.size())));
      bx[i] = xs[idx];
      by[i] = ys[idx];
    }
    double loss = backward_and_adam_step(m, bx, by, step_cfg, state, frozen);
    if (loss_trace) loss_trace->push_back(loss);

    // Tail averaging over the settled low-rate phase; frozen layers are
    // untouched, so averaging them is a no-op by construction.
    if (e >= avg_from) {
      ++avg_count;
      double w_new = 1.0 / static_cast<double>(avg_count);
      for (int l = 0; l < m.weight_layers(); ++l) {
        for (std::size_t i = 0; i < m.w[l].a.size(); ++i)
          avg.w[l].a[i] += (m.w[l].a[i] - avg.w[l].a[i]) * w_new;
        for (std::size_t i = 0; i < m.b[l].size(); ++i)
          avg.b[l][i] += (m.b[l][i] - avg.b[l][i]) * w_new;
      }
    }
  }
  if (avg_count > 0) {
    for (int l = 0; l < m.weight_layers(); ++l) {
      m.w[l] = avg.w[l];
      m.b[l] = avg.b[l];
    }
  }
}

int ScenarioTemplate::count(Service s) const {
  int c = 0;
  for (Service t : slots)
    if (t == s) ++c;
  return c;
}

std::vector<Service> ScenarioTemplate::present_types() const {
  std::vector<Service> out;
  for (Service s : {Service::tolerant, Service::sensitive, Service::urllc})
    if (count(s) > 0) out.push_back(s);
  return out;
}

void set_input_norm(MlpModel& m, const std::vector<std::vector<double>>& xs) {
  if (xs.empty()) throw std::invalid_argument("need data for normalization");
  int d = m.input_dim();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& x : xs)
    for (int i = 0; i < d; ++i) mean[i] += x[i];
  for (int i = 0; i < d; ++i) mean[i] /= static_cast<double>(xs.size());
  for (const auto& x : xs)
    for (int i = 0; i < d; ++i) var[i] += (x[i] - mean[i]) * (x[i] - mean[i]);
  for (int i = 0; i < d; ++i) {
    double s = std::sqrt(var[i] / static_cast<double>(xs.size()));
    m.norm_mean[i] = mean[i];
    m.norm_std[i] = s > 1e-12 ? s : 1.0;
  }
}

namespace {

std::vector<int> arch(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> layers;
  layers.push_back(in);
  layers.insert(layers.end(), hidden.begin(), hidden.end());
  layers.push_back(out);
  return layers;
}

}  // namespace

void phi1_training_arrays(const std::vector<TrainingSample>& samples,
                          const ScenarioTemplate& tmpl,
                          std::vector<std::vector<double>>& xs,
                          std::vector<std::vector<double>>& ys) {
  const int K = tmpl.width();
  xs.clear();
  ys.clear();
  for (const auto& s : samples) {
    xs.push_back(s.x);
    std::vector<double> y(K);
    for (int k = 0; k < K; ++k) y[k] = std::log1p(static_cast<double>(s.n_star[k]));
    ys.push_back(std::move(y));
  }
}

void phi2_training_arrays(const std::vector<TrainingSample>& samples,
                          const ScenarioTemplate& tmpl, Service svc,
                          std::vector<std::vector<double>>& xs,
                          std::vector<std::vector<double>>& ys) {
  const int K = tmpl.width();
  xs.clear();
  ys.clear();
  for (const auto& s : samples) {
    for (int k = 0; k < K; ++k) {
      if (tmpl.slots[k] != svc) continue;
      if (s.x[K + k] == 0.0) continue;  // padded user
      xs.push_back({static_cast<double>(s.n_star[k]), s.x[k], s.x[K + k]});
      ys.push_back({std::log1p(s.p_star[k] * kMwPerW)});
    }
  }
}

MlpModel train_fnn(const std::vector<TrainingSample>& samples, const ScenarioTemplate& tmpl,
                   const std::vector<int>& hidden, const TrainConfig& cfg,
                   std::vector<double>* loss_trace) {
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  const int K = tmpl.width();
  std::vector<std::vector<double>> xs, ys;
  xs.reserve(samples.size());
  ys.reserve(samples.size());
  for (const auto& s : samples) {
    xs.push_back(s.x);
    std::vector<double> y(2 * K);
    for (int k = 0; k < K; ++k) {
      y[k] = std::log1p(static_cast<double>(s.n_star[k]));
      y[K + k] = std::log1p(s.p_star[k] * kMwPerW);
    }
    ys.push_back(std::move(y));
  }
  RngStream rng(cfg.seed);
  MlpModel m = make_mlp(arch(2 * K, hidden, 2 * K), cfg.init, rng);
  set_input_norm(m, xs);
  m.meta["kind"] = "fnn";
  m.meta["target_space"] = "log1p";
  fit_mlp(m, xs, ys, cfg, loss_trace);
  return m;
}

CascadedModel train_cascaded(const std::vector<TrainingSample>& samples,
                             const ScenarioTemplate& tmpl, const std::vector<int>& phi1_hidden,
                             const std::vector<int>& phi2_hidden, const TrainConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  const int K = tmpl.width();
  CascadedModel cm;

  {
    std::vector<std::vector<double>> xs, ys;
    phi1_training_arrays(samples, tmpl, xs, ys);
    RngStream rng(cfg.seed);
    cm.phi1 = make_mlp(arch(2 * K, phi1_hidden, K), cfg.init, rng);
    set_input_norm(cm.phi1, xs);
    cm.phi1.meta["kind"] = "phi1";
    fit_mlp(cm.phi1, xs, ys, cfg);
  }

  for (Service svc : tmpl.present_types()) {
    std::vector<std::vector<double>> xs, ys;
    phi2_training_arrays(samples, tmpl, svc, xs, ys);
    if (xs.empty()) continue;
    RngStream rng = RngStream(cfg.seed).fork(1000 + static_cast<int>(svc));
    MlpModel net = make_mlp(arch(3, phi2_hidden, 1), cfg.init, rng);
    set_input_norm(net, xs);
    net.meta["kind"] = std::string("phi2_") + service_name(svc);
    // The power nets are small and their target smooth; a longer schedule
    // buys precision that every prediction pays for.
    TrainConfig c2 = cfg;
    c2.epochs = cfg.epochs * 3;
    fit_mlp(net, xs, ys, c2);
    cm.phi2[svc] = std::move(net);
  }
  cm.meta["target_space"] = "log1p";
  return cm;
}

CascadedModel init_cascaded(const std::vector<TrainingSample>& samples,
                            const ScenarioTemplate& tmpl, const std::vector<int>& phi1_hidden,
                            const std::vector<int>& phi2_hidden, const TrainConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  const int K = tmpl.width();
  CascadedModel cm;
  {
    std::vector<std::vector<double>> xs, ys;
    phi1_training_arrays(samples, tmpl, xs, ys);
    RngStream rng(cfg.seed);
    cm.phi1 = make_mlp(arch(2 * K, phi1_hidden, K), cfg.init, rng);
    set_input_norm(cm.phi1, xs);
    cm.phi1.meta["kind"] = "phi1";
  }
  for (Service svc : tmpl.present_types()) {
    std::vector<std::vector<double>> xs, ys;
    phi2_training_arrays(samples, tmpl, svc, xs, ys);
    if (xs.empty()) continue;
    RngStream rng = RngStream(cfg.seed).fork(1000 + static_cast<int>(svc));
    MlpModel net = make_mlp(arch(3, phi2_hidden, 1), cfg.init, rng);
    set_input_norm(net, xs);
    net.meta["kind"] = std::string("phi2_") + service_name(svc);
    cm.phi2[svc] = std::move(net);
  }
  cm.meta["target_space"] = "log1p";
  return cm;
}

std::vector<int> quantize_bandwidth(std::span<const double> fractional, int n_max) {
  if (n_max < 0) throw std::invalid_argument("budget must be >= 0");
  std::vector<int> n(fractional.size());
  long sum = 0;
  for (std::size_t i = 0; i < fractional.size(); ++i) {
    double x = fractional[i] < 0.0 ? 0.0 : fractional[i];
    n[i] = static_cast<int>(std::floor(x + 0.5));
    sum += n[i];
  }
  while (sum > n_max) {
    int best = -1;
    double best_over = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (n[i] == 0) continue;
      double over = static_cast<double>(n[i]) - std::max(fractional[i], 0.0);
      if (over >= best_over) {  // ties: keep the lowest index, decrement the highest
        best_over = over;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) break;
    n[best] -= 1;
    --sum;
  }
  return n;
}

std::size_t flop_count(const MlpModel& m) {
  std::size_t c = 0;
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l)
    c += static_cast<std::size_t>(m.layers[l]) * m.layers[l + 1];
  return c;
}

std::size_t flop_count(const CascadedModel& m) {
  std::size_t c = flop_count(m.phi1);
  for (const auto& [svc, net] : m.phi2) c += flop_count(net);
  return c;
}

namespace {

std::vector<double> expm1_clamped(const std::vector<double>& z) {
  std::vector<double> v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = std::max(0.0, std::expm1(z[i]));
  return v;
}

// Decode fractional bandwidth shares into an integer allocation. The raw
// sum is first fitted to the budget proportionally, then rounded half-up.
// Residual overflow and the one-subcarrier floor for users with demand are
// repaired against the largest allocation: by Condition 2 its marginal power
// requirement is the flattest, so it is the cheapest place to take from.
// The plain round-half-up repair instead picks whichever slot sits closest
// above its fraction, which under a binding budget can strip a steep user
// down to a bandwidth whose required power is the whole transmit budget.
std::vector<int> quantize_for_prediction(const std::vector<double>& frac,
                                         const std::vector<char>& active, int n_max) {
  std::vector<double> scaled(frac.size());
  double sum_frac = 0.0;
  for (double f : frac) sum_frac += std::max(f, 0.0);
  double scale = sum_frac > static_cast<double>(n_max) && sum_frac > 0.0
                     ? static_cast<double>(n_max) / sum_frac
                     : 1.0;
  for (std::size_t i = 0; i < frac.size(); ++i) scaled[i] = std::max(frac[i], 0.0) * scale;

  std::vector<int> n(frac.size());
  long sum = 0;
  for (std::size_t i = 0; i < frac.size(); ++i) {
    n[i] = static_cast<int>(std::floor(scaled[i] + 0.5));
    sum += n[i];
  }

  auto donor = [&](int exclude) {
    int best = -1;
    for (std::size_t j = 0; j < n.size(); ++j) {
      if (static_cast<int>(j) == exclude || n[j] < 2) continue;
      if (best < 0 || n[j] > n[best] ||
          (n[j] == n[best] && n[j] - scaled[j] >= n[best] - scaled[best]))
        best = static_cast<int>(j);
    }
    return best;
  };

  while (sum > n_max) {
    int d = donor(-1);
    if (d < 0) {
      // Only single-subcarrier slots left; drop the highest index.
      for (std::size_t j = n.size(); j-- > 0;)
        if (n[j] > 0) {
          d = static_cast<int>(j);
          break;
        }
      if (d < 0) break;
    }
    n[d] -= 1;
    --sum;
  }

  for (std::size_t k = 0; k < n.size(); ++k) {
    if (!active[k] || n[k] > 0) continue;
    if (sum < n_max) {
      n[k] = 1;
      ++sum;
      continue;
    }
    int d = donor(static_cast<int>(k));
    if (d >= 0) {
      n[d] -= 1;
      n[k] = 1;
    }
  }
  return n;
}

}  // namespace

PredictedAlloc predict_cascaded(const CascadedModel& m, const ScenarioTemplate& tmpl,
                                std::span<const double> x, int n_max, double p_cap_w) {
  const int K = tmpl.width();
  if (static_cast<int>(x.size()) != 2 * K) throw std::invalid_argument("feature width mismatch");
  std::vector<double> frac = expm1_clamped(forward(m.phi1, x));
  std::vector<char> active(K, 0);
  for (int k = 0; k < K; ++k) {
    active[k] = x[K + k] != 0.0;
    if (!active[k]) frac[k] = 0.0;  // no demand, no resources
  }
  PredictedAlloc out;
  out.n = quantize_for_prediction(frac, active, n_max);
  out.p.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    if (!active[k] || out.n[k] == 0) continue;
    auto it = m.phi2.find(tmpl.slots[k]);
    if (it == m.phi2.end()) throw std::runtime_error("no power net for service");
    std::vector<double> in = {static_cast<double>(out.n[k]), x[k], x[K + k]};
    out.p[k] = std::min(std::max(0.0, std::expm1(forward(it->second, in)[0])) / kMwPerW, p_cap_w);
  }
  return out;
}

PredictedAlloc predict_fnn(const MlpModel& m, const ScenarioTemplate& tmpl,
                           std::span<const double> x, int n_max, double p_cap_w) {
  const int K = tmpl.width();
  if (static_cast<int>(x.size()) != 2 * K) throw std::invalid_argument("feature width mismatch");
  std::vector<double> y = forward(m, x);
  std::vector<double> frac(K), p(K);
  std::vector<char> active(K, 0);
  for (int k = 0; k < K; ++k) {
    active[k] = x[K + k] != 0.0;
    frac[k] = active[k] ? std::max(0.0, std::expm1(y[k])) : 0.0;
    p[k] = active[k] ? std::min(std::max(0.0, std::expm1(y[K + k])) / kMwPerW, p_cap_w) : 0.0;
  }
  PredictedAlloc out;
  out.n = quantize_for_prediction(frac, active, n_max);
  out.p = std::move(p);
  for (int k = 0; k < K; ++k)
    if (out.n[k] == 0) out.p[k] = 0.0;
  return out;
}

// --- persistence ---------------------------------------------------------

namespace {

void write_vec(std::ostream& os, const char* tag, const std::vector<double>& v) {
  os << tag << ' ' << v.size();
  for (double x : v) os << ' ' << fmt17(x);
  os << '\n';
}

std::vector<double> read_vec(std::istream& is, const char* tag) {
  std::string t;
  std::size_t n;
  is >> t >> n;
  if (t != tag) throw std::runtime_error("model parse: expected " + std::string(tag));
  std::vector<double> v(n);
  for (double& x : v) is >> x;
  return v;
}

}  // namespace

void save_mlp(std::ostream& os, const MlpModel& m) {
  os << "raqos-mlp 1\n";
  os << "layers " << m.layers.size();
  for (int n : m.layers) os << ' ' << n;
  os << '\n';
  os << "init " << (m.init == MlpModel::Init::he ? "he" : "gauss") << '\n';
  write_vec(os, "norm_mean", m.norm_mean);
  write_vec(os, "norm_std", m.norm_std);
  for (int l = 0; l < m.weight_layers(); ++l) {
    os << "w " << l << ' ' << m.w[l].rows << ' ' << m.w[l].cols;
    for (double x : m.w[l].a) os << ' ' << fmt17(x);
    os << '\n';
    write_vec(os, "b", m.b[l]);
  }
  os << "meta " << m.meta.size() << '\n';
  for (const auto& [k, v] : m.meta) os << k << ' ' << v << '\n';
  os << "end\n";
}

MlpModel load_mlp(std::istream& is) {
  std::string tag;
  int version;
  is >> tag >> version;
  if (tag != "raqos-mlp" || version != 1) throw std::runtime_error("not a raqos-mlp v1 document");
  MlpModel m;
  std::size_t L;
  is >> tag >> L;
  if (tag != "layers") throw std::runtime_error("model parse: expected layers");
  m.layers.resize(L);
  for (int& n : m.layers) is >> n;
  std::string init;
  is >> tag >> init;
  if (tag != "init") throw std::runtime_error("model parse: expected init");
  m.init = init == "gauss" ? MlpModel::Init::gauss : MlpModel::Init::he;
  m.norm_mean = read_vec(is, "norm_mean");
  m.norm_std = read_vec(is, "norm_std");
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    int idx, rows, cols;
    is >> tag >> idx >> rows >> cols;
    if (tag != "w") throw std::runtime_error("model parse: expected w");
    Matrix w(rows, cols);
    for (double& x : w.a) is >> x;
    m.w.push_back(std::move(w));
    m.b.push_back(read_vec(is, "b"));
  }
  std::size_t nmeta;
  is >> tag >> nmeta;
  if (tag != "meta") throw std::runtime_error("model parse: expected meta");
  for (std::size_t i = 0; i < nmeta; ++i) {
    std::string k, v;
    is >> k >> v;
    m.meta[k] = v;
  }
  is >> tag;
  if (tag != "end") throw std::runtime_error("model parse: expected end");
  return m;
}

void save_cascaded(std::ostream& os, const CascadedModel& m) {
  os << "raqos-cascade 1\n";
  os << "meta " << m.meta.size() << '\n';
  for (const auto& [k, v] : m.meta) os << k << ' ' << v << '\n';
  os << "phi1\n";
  save_mlp(os, m.phi1);
  os << "phi2 " << m.phi2.size() << '\n';
  for (const auto& [svc, net] : m.phi2) {
    os << service_name(svc) << '\n';
    save_mlp(os, net);
  }
  os << "end\n";
}

CascadedModel load_cascaded(std::istream& is) {
  std::string tag;
  int version;
  is >> tag >> version;
  if (tag != "raqos-cascade" || version != 1)
    throw std::runtime_error("not a raqos-cascade v1 document");
  CascadedModel m;
  std::size_t nmeta;
  is >> tag >> nmeta;
  if (tag != "meta") throw std::runtime_error("model parse: expected meta");
  for (std::size_t i = 0; i < nmeta; ++i) {
    std::string k, v;
    is >> k >> v;
    m.meta[k] = v;
  }
  is >> tag;
  if (tag != "phi1") throw std::runtime_error("model parse: expected phi1");
  m.phi1 = load_mlp(is);
  std::size_t n2;
  is >> tag >> n2;
  if (tag != "phi2") throw std::runtime_error("model parse: expected phi2");
  for (std::size_t i = 0; i < n2; ++i) {
    std::string svc;
    is >> svc;
    m.phi2[service_from_name(svc)] = load_mlp(is);
  }
  is >> tag;
  if (tag != "end") throw std::runtime_error("model parse: expected end");
  return m;
}

void save_model_file(const std::string& path, const CascadedModel& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  save_cascaded(os, m);
}

CascadedModel load_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return load_cascaded(is);
}

std::string model_digest(const CascadedModel& m) {
  std::ostringstream os;
  save_cascaded(os, m);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(os.str())));
  return buf;
}

}  // namespace raqos

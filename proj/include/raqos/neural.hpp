#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "raqos/qos.hpp"
#include "raqos/rng.hpp"

namespace raqos {

// Dense row-major matrix, just large enough for desk-scale MLPs.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

// Multilayer perceptron: ReLU hidden layers, identity output, affine input
// normalization baked into the model so a saved model is self-contained.
struct MlpModel {
  enum class Init { he, gauss };

  std::vector<int> layers;                // n[0..L]
  std::vector<Matrix> w;                  // w[l]: layers[l+1] x layers[l]
  std::vector<std::vector<double>> b;
  std::vector<double> norm_mean, norm_std;
  Init init = Init::he;
  std::map<std::string, std::string> meta;

  int weight_layers() const { return static_cast<int>(w.size()); }
  int input_dim() const { return layers.front(); }
  int output_dim() const { return layers.back(); }
  std::size_t parameter_count() const;
};

MlpModel make_mlp(const std::vector<int>& layers, MlpModel::Init init, RngStream& rng);

// Per-feature standardization statistics from a training set.
void set_input_norm(MlpModel& m, const std::vector<std::vector<double>>& xs);

std::vector<double> forward(const MlpModel& m, std::span<const double> x);
std::vector<double> forward_instrumented(const MlpModel& m, std::span<const double> x,
                                         std::size_t* mult_count);

// Batch mean of squared log1p differences, averaged over outputs and batch.
double loss_log_mse(std::span<const double> pred, std::span<const double> label);

struct TrainConfig {
  int batch_size = 128;
  double learning_rate = 1e-3;
  int epochs = 1000;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t seed = 1;
  MlpModel::Init init = MlpModel::Init::he;
  // Parameters are averaged over this trailing fraction of the epochs (the
  // low-learning-rate phase); 0 keeps the last iterate.
  double weight_avg_tail = 0.25;
};

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<std::vector<double>> mb, vb;
  long step = 0;
};

AdamState make_adam_state(const MlpModel& m);

// Mean squared error of the net on a batch (the training loss; targets are
// already in the trained output space).
double mse_loss(const MlpModel& m, const std::vector<std::vector<double>>& xs,
                const std::vector<std::vector<double>>& ys);

// One backprop + Adam update over the batch; returns the pre-update loss.
// frozen, when given, marks weight layers whose parameters must not move.
double backward_and_adam_step(MlpModel& m, const std::vector<std::vector<double>>& xs,
                              const std::vector<std::vector<double>>& ys,
                              const TrainConfig& cfg, AdamState& state,
                              const std::vector<char>* frozen = nullptr);

// Epoch loop: each epoch draws one batch (with replacement) and takes one
// step. Appends the per-epoch loss to loss_trace when provided.
void fit_mlp(MlpModel& m, const std::vector<std::vector<double>>& xs,
             const std::vector<std::vector<double>>& ys, const TrainConfig& cfg,
             std::vector<double>* loss_trace = nullptr,
             const std::vector<char>* frozen = nullptr);

// Per-slot service classes of the fixed-width user layout.
struct ScenarioTemplate {
  std::vector<Service> slots;

  int width() const { return static_cast<int>(slots.size()); }
  int count(Service s) const;
  std::vector<Service> present_types() const;
};

// One labeled sample: features x = [alpha feature per slot, traffic feature
// per slot] and the optimal allocation labels.
struct TrainingSample {
  std::vector<double> x;
  std::vector<int> n_star;
  std::vector<double> p_star;
};

// Bandwidth net plus one power net per service type present.
struct CascadedModel {
  MlpModel phi1;
  std::map<Service, MlpModel> phi2;
  std::map<std::string, std::string> meta;
};

// Training arrays in the nets' log1p output space.
void phi1_training_arrays(const std::vector<TrainingSample>& samples,
                          const ScenarioTemplate& tmpl,
                          std::vector<std::vector<double>>& xs,
                          std::vector<std::vector<double>>& ys);
void phi2_training_arrays(const std::vector<TrainingSample>& samples,
                          const ScenarioTemplate& tmpl, Service svc,
                          std::vector<std::vector<double>>& xs,
                          std::vector<std::vector<double>>& ys);

// Single net X -> [N; P], trained on log1p targets.
MlpModel train_fnn(const std::vector<TrainingSample>& samples, const ScenarioTemplate& tmpl,
                   const std::vector<int>& hidden, const TrainConfig& cfg,
                   std::vector<double>* loss_trace = nullptr);

// phi_I on X -> N and one phi_II per service on [N*_k, alpha_k, c_k] -> P*_k.
CascadedModel train_cascaded(const std::vector<TrainingSample>& samples,
                             const ScenarioTemplate& tmpl, const std::vector<int>& phi1_hidden,
                             const std::vector<int>& phi2_hidden, const TrainConfig& cfg);

// Freshly initialized, untrained cascade with data-driven normalization; the
// random-initialization baseline of the transfer comparisons.
CascadedModel init_cascaded(const std::vector<TrainingSample>& samples,
                            const ScenarioTemplate& tmpl, const std::vector<int>& phi1_hidden,
                            const std::vector<int>& phi2_hidden, const TrainConfig& cfg);

// Round half-up with a floor at zero; when the sum exceeds the budget,
// repeatedly decrement the most over-provisioned entry (ties keep the lowest
// index) until the sum fits.
std::vector<int> quantize_bandwidth(std::span<const double> fractional, int n_max);

// Multiplications per forward pass: sum of n_l * n_{l+1}. The cascaded count
// runs phi_I once plus each distinct per-service net once.
std::size_t flop_count(const MlpModel& m);
std::size_t flop_count(const CascadedModel& m);

struct PredictedAlloc {
  std::vector<int> n;
  std::vector<double> p;
};

// Per-user powers are clamped at p_cap_w, the physical transmit budget.
PredictedAlloc predict_cascaded(const CascadedModel& m, const ScenarioTemplate& tmpl,
                                std::span<const double> x, int n_max,
                                double p_cap_w = 1e30);
PredictedAlloc predict_fnn(const MlpModel& m, const ScenarioTemplate& tmpl,
                           std::span<const double> x, int n_max, double p_cap_w = 1e30);

// Versioned text persistence; values stored with 17 significant digits so the
// round trip is value-exact.
void save_mlp(std::ostream& os, const MlpModel& m);
MlpModel load_mlp(std::istream& is);
void save_cascaded(std::ostream& os, const CascadedModel& m);
CascadedModel load_cascaded(std::istream& is);
void save_model_file(const std::string& path, const CascadedModel& m);
CascadedModel load_model_file(const std::string& path);

std::string model_digest(const CascadedModel& m);

}  // namespace raqos

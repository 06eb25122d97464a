#pragma once

#include <functional>
#include <optional>
#include <span>

#include "raqos/qos.hpp"
#include "raqos/rng.hpp"

namespace raqos {

// Small-scale gain distribution used by a solve. The frozen variant pins the
// gain to a constant, which turns every constraint into a closed-form curve
// and is the basis of the analytic test oracles.
class GainModel {
 public:
  static GainModel gamma(int shape);
  static GainModel frozen(double gain);

  double sample(RngStream& rng) const;
  double mean() const { return mean_; }
  bool is_frozen() const { return frozen_; }

 private:
  GainModel() = default;
  bool frozen_ = false;
  double mean_ = 1.0;  // gamma shape, or the frozen gain
};

struct SolverConfig {
  double step_scale = 1.5;      // phi_0; step phi(tau) = phi_0 * P_ref / tau
  int max_iters = 4000;
  int draws_per_iter = 256;     // Monte Carlo batch per SGD iterate
  double residual_tol = 1e-3;   // relative residual certified over the tail window
  int window_min = 50;          // smallest certification window
  int oracle_draws = 100000;    // frozen draw count of the bisection oracle
  double bisect_rel_width = 1e-6;

  void validate() const;
};

enum class SolveStatus { converged, infeasible, no_convergence };

struct SolveResult {
  SolveStatus status = SolveStatus::converged;
  double power_w = 0.0;
  double residual = 0.0;  // tail-averaged relative constraint residual
  int iters = 0;

  bool ok() const { return status == SolveStatus::converged; }
};

// Minimum power meeting the user's constraint on a deterministic channel with
// the given frozen gain; exact inversion of the rate / effective-capacity /
// error-probability expressions.
double frozen_gain_min_power(const UserSpec& user, int n, const SystemConfig& cfg, double gain);

// Closed-form URLLC minimum power in the channel-hardened regime,
// P(n) = (N0 n W / alpha) * (exp(B ln2/(Ts n W) + Qinv(eps)/sqrt(Ts n W)) - 1).
double urllc_closed_form_power(const UserSpec& user, int n, const SystemConfig& cfg);

// Projected stochastic power iterations, one per service class. The iterate is
// P <- [P + phi(tau) r(tau)]^+ with a fresh Monte Carlo residual r per step;
// convergence is certified when the signed mean of the relative residual over
// the tail window (at least window_min iterates, growing to half the run)
// drops below residual_tol.
SolveResult sgd_min_power_tolerant(const UserSpec& user, int n, const SystemConfig& cfg,
                                   const SolverConfig& sol, const GainModel& model,
                                   RngStream& rng, std::optional<double> p_init = {});
SolveResult sgd_min_power_sensitive(const UserSpec& user, int n, const SystemConfig& cfg,
                                    const SolverConfig& sol, const GainModel& model,
                                    RngStream& rng, std::optional<double> p_init = {});
SolveResult sgd_min_power_urllc(const UserSpec& user, int n, const SystemConfig& cfg,
                                const SolverConfig& sol, const GainModel& model,
                                RngStream& rng, std::optional<double> p_init = {});

SolveResult sgd_min_power(const UserSpec& user, int n, const SystemConfig& cfg,
                          const SolverConfig& sol, const GainModel& model, RngStream& rng,
                          std::optional<double> p_init = {});

// High-precision root bracketing on a frozen draw matrix (common random
// numbers across the whole bracket). Deterministic given the stream state;
// signals infeasible when the root lies above p_max.
SolveResult bisection_min_power(const UserSpec& user, int n, const SystemConfig& cfg,
                                const SolverConfig& sol, const GainModel& model, RngStream& rng);

// Root find of a monotone-decreasing residual on frozen gains; shared by the
// bisection oracle and the allocator's power cache. gains layout: for
// tolerant/sensitive any number of scalar realizations, for URLLC chunks of n.
struct FrozenRoot {
  double power_w = 0.0;      // true root, even when it exceeds the cap
  bool capped = false;       // root lies above cap_w
  double stderr_w = 0.0;     // propagated Monte Carlo standard error at the root
};
FrozenRoot min_power_on_draws(const UserSpec& user, int n, const SystemConfig& cfg,
                              std::span<const double> gains, double cap_w, double rel_width,
                              bool with_stderr = false);

}  // namespace raqos

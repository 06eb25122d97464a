#include "raqos/solver.hpp"

#include <algorithm>
#include <utility>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace raqos {

namespace {
constexpr double kLn2 = 0.6931471805599453094172321;

double snr_coeff(const UserSpec& user, int n, const SystemConfig& cfg, bool with_gap) {
  double gap = with_gap ? cfg.snr_gap : 1.0;
  return user.alpha /
         (gap * cfg.noise_w_hz * cfg.n_antennas * static_cast<double>(n) * cfg.subcarrier_bw_hz);
}
}  // namespace

GainModel GainModel::gamma(int shape) {
  if (shape < 1) throw std::invalid_argument("gamma shape must be >= 1");
  GainModel m;
  m.frozen_ = false;
  m.mean_ = static_cast<double>(shape);
  return m;
}

GainModel GainModel::frozen(double gain) {
  if (!(gain > 0.0)) throw std::invalid_argument("frozen gain must be positive");
  GainModel m;
  m.frozen_ = true;
  m.mean_ = gain;
  return m;
}

double GainModel::sample(RngStream& rng) const {
  return frozen_ ? mean_ : rng.gamma(mean_);
}

void SolverConfig::validate() const {
  if (!(step_scale > 0.0)) throw std::invalid_argument("step scale must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (draws_per_iter < 1) throw std::invalid_argument("draws_per_iter must be >= 1");
  if (!(residual_tol > 0.0) || residual_tol >= 1.0)
    throw std::invalid_argument("residual tolerance must be in (0, 1)");
  if (!(bisect_rel_width > 0.0) || bisect_rel_width >= 1.0)
    throw std::invalid_argument("bisection width must be in (0, 1)");
  if (window_min < 1) throw std::invalid_argument("window must be >= 1");
  if (oracle_draws < 1) throw std::invalid_argument("oracle draws must be >= 1");
}

double frozen_gain_min_power(const UserSpec& user, int n, const SystemConfig& cfg, double gain) {
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  if (!(gain > 0.0)) throw std::invalid_argument("gain must be positive");
  double nw = static_cast<double>(n) * cfg.subcarrier_bw_hz;
  switch (user.service) {
    case Service::tolerant: {
      double demand = std::get<TolerantTraffic>(user.traffic).mean_rate_bps;
      if (demand <= 0.0) return 0.0;
      return std::expm1(demand / nw * kLn2) / (snr_coeff(user, n, cfg, false) * gain);
    }
    case Service::sensitive: {
      const auto& t = std::get<SensitiveTraffic>(user.traffic);
      if (t.arrival_rate_pps <= 0.0) return 0.0;
      double eb = effective_bandwidth(t);
      return std::expm1(eb / nw * kLn2) / (snr_coeff(user, n, cfg, true) * gain);
    }
    case Service::urllc: {
      const auto& t = std::get<UrllcTraffic>(user.traffic);
      if (t.packet_bits <= 0.0) return 0.0;
      double tsnw = cfg.tti_s * nw;
      double expo = t.packet_bits * kLn2 / tsnw + q_inverse(t.error_bound) / std::sqrt(tsnw);
      double v = std::expm1(expo);
      return v > 0.0 ? v / (snr_coeff(user, n, cfg, false) * gain) : 0.0;
    }
  }
  return 0.0;
}

double urllc_closed_form_power(const UserSpec& user, int n, const SystemConfig& cfg) {
  // Channel hardening replaces g/N_T by 1, i.e. a frozen gain of N_T.
  return frozen_gain_min_power(user, n, cfg, static_cast<double>(cfg.n_antennas));
}

namespace {

// Normalized constraint residual on fixed gains; positive means the QoS
// demand is not yet met, strictly decreasing in P.
struct FrozenEval {
  const UserSpec* user;
  int n;
  const SystemConfig* cfg;
  std::span<const double> gains;

  // Per-draw statistic target and mean; the sensitive service uses the
  // per-scalar factor m = (1+cPg)^-w against exp(-theta Tc E^B / n), which has
  // the same root as the chunked form but stays smooth in n on shared draws.
  double eval(double p, double* sample_std = nullptr) const {
    switch (user->service) {
      case Service::tolerant: {
        double demand = std::get<TolerantTraffic>(user->traffic).mean_rate_bps;
        double c = snr_coeff(*user, n, *cfg, false) * p;
        double nw = static_cast<double>(n) * cfg->subcarrier_bw_hz;
        double acc = 0.0, acc2 = 0.0;
        for (double g : gains) {
          double r = nw * std::log1p(c * g) / kLn2;
          acc += r;
          acc2 += r * r;
        }
        double m = acc / static_cast<double>(gains.size());
        if (sample_std) {
          double var = std::max(0.0, acc2 / static_cast<double>(gains.size()) - m * m);
          *sample_std = std::sqrt(var / static_cast<double>(gains.size())) / demand;
        }
        return (demand - m) / demand;
      }
      case Service::sensitive: {
        const auto& t = std::get<SensitiveTraffic>(user->traffic);
        double theta = qos_exponent(t);
        double eb = effective_bandwidth(t);
        double target = std::exp(-theta * cfg->coherence_s * eb / static_cast<double>(n));
        double w_exp = theta * cfg->coherence_s * cfg->subcarrier_bw_hz / kLn2;
        double c = snr_coeff(*user, n, *cfg, true) * p;
        double acc = 0.0, acc2 = 0.0;
        for (double g : gains) {
          double x = std::exp(-w_exp * std::log1p(c * g));
          acc += x;
          acc2 += x * x;
        }
        double m = acc / static_cast<double>(gains.size());
        if (sample_std) {
          double var = std::max(0.0, acc2 / static_cast<double>(gains.size()) - m * m);
          *sample_std = std::sqrt(var / static_cast<double>(gains.size())) / target;
        }
        return (m - target) / target;
      }
      case Service::urllc: {
        const auto& t = std::get<UrllcTraffic>(user->traffic);
        double tsw = cfg->tti_s * cfg->subcarrier_bw_hz;
        double scale = std::sqrt(tsw / static_cast<double>(n));
        double bits_term = t.packet_bits * kLn2 / tsw;
        double c = snr_coeff(*user, n, *cfg, false) * p;
        std::size_t draws = gains.size() / static_cast<std::size_t>(n);
        double acc = 0.0, acc2 = 0.0;
        for (std::size_t d = 0; d < draws; ++d) {
          const double* chunk = gains.data() + d * static_cast<std::size_t>(n);
          double sum_log = 0.0;
          for (int i = 0; i < this->n; ++i) sum_log += std::log1p(c * chunk[i]);
          double q = q_function(scale * (sum_log - bits_term));
          acc += q;
          acc2 += q * q;
        }
        double m = acc / static_cast<double>(draws);
        if (sample_std) {
          double var = std::max(0.0, acc2 / static_cast<double>(draws) - m * m);
          *sample_std = std::sqrt(var / static_cast<double>(draws)) / t.error_bound;
        }
        return (m - t.error_bound) / t.error_bound;
      }
    }
    return 0.0;
  }
};

}  // namespace

FrozenRoot min_power_on_draws(const UserSpec& user, int n, const SystemConfig& cfg,
                              std::span<const double> gains, double cap_w, double rel_width,
                              bool with_stderr) {
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  if (gains.empty()) throw std::invalid_argument("gain draws must be non-empty");
  FrozenRoot out;
  if (user.feature() <= 0.0) return out;

  FrozenEval ev{&user, n, &cfg, gains};
  double mean_g = 0.0;
  for (double g : gains) mean_g += g;
  mean_g /= static_cast<double>(gains.size());

  double hi = std::max(frozen_gain_min_power(user, n, cfg, mean_g), 1e-12);
  double lo = 0.0, flo = ev.eval(0.0);
  if (flo <= 0.0) return out;  // no power needed
  double fhi = ev.eval(hi);
  while (fhi > 0.0) {
    if (hi >= 1e28) {
      // Demand unreachable at any representable power.
      out.power_w = hi;
      out.capped = true;
      return out;
    }
    lo = hi;
    flo = fhi;
    hi *= 2.0;
    fhi = ev.eval(hi);
  }

  // Illinois regula falsi on the bracket.
  int last_side = 0;
  for (int it = 0; it < 200 && (hi - lo) > rel_width * std::max(hi, 1e-300); ++it) {
    double mid;
    double df = fhi - flo;
    if (std::isfinite(df) && df != 0.0) {
      mid = hi - fhi * (hi - lo) / df;
      if (!(mid > lo) || !(mid < hi)) mid = 0.5 * (lo + hi);
    } else {
      mid = 0.5 * (lo + hi);
    }
    double fm = ev.eval(mid);
    if (fm > 0.0) {
      lo = mid;
      flo = fm;
      if (last_side == -1) fhi *= 0.5;
      last_side = -1;
    } else {
      hi = mid;
      fhi = fm;
      if (last_side == 1) flo *= 0.5;
      last_side = 1;
    }
  }
  // The true root is reported even beyond the cap; the flag lets callers
  // decide between clamping and an infeasibility signal.
  out.power_w = 0.5 * (lo + hi);
  out.capped = out.power_w > cap_w;

  if (with_stderr) {
    double s = 0.0;
    ev.eval(out.power_w, &s);
    double dp = std::max(out.power_w * 1e-3, 1e-30);
    double slope = (ev.eval(out.power_w + dp) - ev.eval(std::max(out.power_w - dp, 0.0))) /
                   (out.power_w + dp - std::max(out.power_w - dp, 0.0));
    out.stderr_w = std::abs(slope) > 0.0 ? s / std::abs(slope) : 0.0;
  }
  return out;
}

SolveResult bisection_min_power(const UserSpec& user, int n, const SystemConfig& cfg,
                                const SolverConfig& sol, const GainModel& model, RngStream& rng) {
  sol.validate();
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  SolveResult res;
  if (user.feature() <= 0.0) return res;

  std::size_t count = static_cast<std::size_t>(model.is_frozen() ? 1 : sol.oracle_draws);
  if (user.service == Service::urllc) count *= static_cast<std::size_t>(n);
  std::vector<double> gains(count);
  for (double& g : gains) g = model.sample(rng);

  FrozenRoot root = min_power_on_draws(user, n, cfg, gains, cfg.p_max_w, sol.bisect_rel_width);
  res.power_w = root.power_w;  // the true requirement, also when infeasible
  res.status = root.capped ? SolveStatus::infeasible : SolveStatus::converged;
  return res;
}

namespace {

// Shared projected-SGD driver. residual(P, rng) returns the update residual
// (positive pushes power up) and the raw relative constraint gap; step_ref
// carries the constraint's local sensitivity so phi0/tau contracts at a
// service-independent rate. Certification: signed mean of the raw gap over
// the last max(window_min, tau/2) iterates below residual_tol.
SolveResult run_sgd(double p_warm, double step_ref, const SolverConfig& sol, RngStream& rng,
                    std::optional<double> p_init,
                    const std::function<std::pair<double, double>(double, RngStream&)>& residual) {
  SolveResult res;
  double p = p_init.value_or(p_warm);
  double p_ref = std::max(step_ref, 1e-12);
  std::vector<double> rsum(1, 0.0), psum(1, 0.0);
  rsum.reserve(sol.max_iters + 1);
  psum.reserve(sol.max_iters + 1);

  for (int tau = 1; tau <= sol.max_iters; ++tau) {
    auto [step_r, gap] = residual(p, rng);
    rsum.push_back(rsum.back() + gap);
    step_r = std::clamp(step_r, -50.0, 50.0);
    p = std::max(0.0, p + sol.step_scale * p_ref / static_cast<double>(tau) * step_r);
    psum.push_back(psum.back() + p);

    if (tau >= sol.window_min) {
      int w = std::max(sol.window_min, tau / 2);
      double mean_r = (rsum[tau] - rsum[tau - w]) / static_cast<double>(w);
      if (std::abs(mean_r) < sol.residual_tol) {
        res.status = SolveStatus::converged;
        res.power_w = (psum[tau] - psum[tau - w]) / static_cast<double>(w);
        res.residual = mean_r;
        res.iters = tau;
        return res;
      }
    }
  }
  int tau = sol.max_iters;
  int w = std::max(sol.window_min, tau / 2);
  w = std::min(w, tau);
  res.status = SolveStatus::no_convergence;
  res.power_w = (psum[tau] - psum[tau - w]) / static_cast<double>(w);
  res.residual = (rsum[tau] - rsum[tau - w]) / static_cast<double>(w);
  res.iters = tau;
  return res;
}

}  // namespace

SolveResult sgd_min_power_tolerant(const UserSpec& user, int n, const SystemConfig& cfg,
                                   const SolverConfig& sol, const GainModel& model,
                                   RngStream& rng, std::optional<double> p_init) {
  sol.validate();
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  if (user.service != Service::tolerant) throw std::invalid_argument("expected tolerant user");
  double demand = std::get<TolerantTraffic>(user.traffic).mean_rate_bps;
  if (demand <= 0.0) return {};

  double nw = static_cast<double>(n) * cfg.subcarrier_bw_hz;
  double c0 = snr_coeff(user, n, cfg, false);
  auto residual = [&](double p, RngStream& r) {
    double acc = 0.0;
    for (int i = 0; i < sol.draws_per_iter; ++i) acc += std::log1p(c0 * p * model.sample(r));
    double rate = nw * acc / (kLn2 * sol.draws_per_iter);
    double g = (demand - rate) / demand;
    return std::pair{g, g};
  };
  double p_warm = frozen_gain_min_power(user, n, cfg, model.mean());
  // d(residual)/d(ln P) at the warm point: s / ((1+s) ln(1+s)).
  double s = c0 * model.mean() * p_warm;
  double kappa = std::max(s / ((1.0 + s) * std::log1p(s)), 0.05);
  SolveResult res =
      run_sgd(p_warm, p_warm / kappa, sol, rng, p_init, residual);
  if (res.ok() && res.power_w > cfg.p_max_w) res.status = SolveStatus::infeasible;
  return res;
}

SolveResult sgd_min_power_sensitive(const UserSpec& user, int n, const SystemConfig& cfg,
                                    const SolverConfig& sol, const GainModel& model,
                                    RngStream& rng, std::optional<double> p_init) {
  sol.validate();
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  if (user.service != Service::sensitive) throw std::invalid_argument("expected sensitive user");
  const auto& t = std::get<SensitiveTraffic>(user.traffic);
  if (t.arrival_rate_pps <= 0.0) return {};

  double theta = qos_exponent(t);
  double eb = effective_bandwidth(t);
  // Transformed constraint, linear in the expectation:
  // E[exp(-theta Tc R)] <= exp(-theta Tc E^B).
  double target = std::exp(-theta * cfg.coherence_s * eb);
  double w_exp = theta * cfg.coherence_s * cfg.subcarrier_bw_hz / kLn2;
  double c0 = snr_coeff(user, n, cfg, true);
  auto residual = [&](double p, RngStream& r) {
    double acc = 0.0;
    for (int i = 0; i < sol.draws_per_iter; ++i) {
      double sum_log = 0.0;
      for (int j = 0; j < n; ++j) sum_log += std::log1p(c0 * p * model.sample(r));
      acc += std::exp(-w_exp * sum_log);
    }
    double g = (acc / sol.draws_per_iter - target) / target;
    return std::pair{g, g};
  };
  double p_warm = frozen_gain_min_power(user, n, cfg, model.mean());
  double s = c0 * model.mean() * p_warm;
  double kappa = std::max(w_exp * n * s / (1.0 + s), 0.05);
  SolveResult res = run_sgd(p_warm, p_warm / kappa, sol, rng, p_init, residual);
  if (res.ok() && res.power_w > cfg.p_max_w) res.status = SolveStatus::infeasible;
  return res;
}

SolveResult sgd_min_power_urllc(const UserSpec& user, int n, const SystemConfig& cfg,
                                const SolverConfig& sol, const GainModel& model, RngStream& rng,
                                std::optional<double> p_init) {
  sol.validate();
  if (n < 1) throw std::invalid_argument("subcarrier count must be >= 1");
  if (user.service != Service::urllc) throw std::invalid_argument("expected urllc user");
  const auto& t = std::get<UrllcTraffic>(user.traffic);
  if (t.packet_bits <= 0.0) return {};

  double tsw = cfg.tti_s * cfg.subcarrier_bw_hz;
  double scale = std::sqrt(tsw / static_cast<double>(n));
  double bits_term = t.packet_bits * kLn2 / tsw;
  double c0 = snr_coeff(user, n, cfg, false);
  auto batch = [&](double p, RngStream& r, double* std_out) {
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < sol.draws_per_iter; ++i) {
      double sum_log = 0.0;
      for (int j = 0; j < n; ++j) sum_log += std::log1p(c0 * p * model.sample(r));
      double q = q_function(scale * (sum_log - bits_term));
      acc += q;
      acc2 += q * q;
    }
    double m = acc / sol.draws_per_iter;
    if (std_out) {
      double var = std::max(0.0, acc2 / sol.draws_per_iter - m * m);
      *std_out = std::sqrt(var / sol.draws_per_iter);
    }
    return m;
  };

  // Per-user infeasibility: even the full budget leaves the error above the
  // bound (beyond Monte Carlo uncertainty).
  {
    double acc = 0.0, acc2 = 0.0;
    for (int k = 0; k < sol.window_min; ++k) {
      double m = batch(cfg.p_max_w, rng, nullptr);
      acc += m;
      acc2 += m * m;
    }
    double mean = acc / sol.window_min;
    double var = std::max(0.0, acc2 / sol.window_min - mean * mean);
    double se = std::sqrt(var / sol.window_min);
    if (mean - t.error_bound > 3.0 * se && mean > t.error_bound) {
      SolveResult res;
      res.status = SolveStatus::infeasible;
      res.power_w = cfg.p_max_w;
      res.residual = (mean - t.error_bound) / t.error_bound;
      return res;
    }
  }

  // The error probability spans decades around the bound, so the update works
  // in the Q-argument domain, where the sensitivity to ln P is symmetric. The
  // certificate still pools the raw probability gap.
  double x_target = q_inverse(t.error_bound);
  double eps_floor = t.error_bound * 1e-3;
  auto residual = [&](double p, RngStream& r) {
    double eps = batch(p, r, nullptr);
    double gap = (eps - t.error_bound) / t.error_bound;
    double upd = x_target - q_inverse(std::clamp(eps, eps_floor, 1.0 - 1e-12));
    return std::pair{upd, gap};
  };
  double p_warm = frozen_gain_min_power(user, n, cfg, model.mean());
  double s = c0 * model.mean() * p_warm;
  double kappa = std::max(std::sqrt(tsw * static_cast<double>(n)) * s / (1.0 + s), 0.05);
  SolveResult res = run_sgd(p_warm, p_warm / kappa, sol, rng, p_init, residual);
  if (res.ok() && res.power_w > cfg.p_max_w) res.status = SolveStatus::infeasible;
  return res;
}

SolveResult sgd_min_power(const UserSpec& user, int n, const SystemConfig& cfg,
                          const SolverConfig& sol, const GainModel& model, RngStream& rng,
                          std::optional<double> p_init) {
  switch (user.service) {
    case Service::tolerant: return sgd_min_power_tolerant(user, n, cfg, sol, model, rng, p_init);
    case Service::sensitive: return sgd_min_power_sensitive(user, n, cfg, sol, model, rng, p_init);
    case Service::urllc: return sgd_min_power_urllc(user, n, cfg, sol, model, rng, p_init);
  }
  return {};
}

}  // namespace raqos

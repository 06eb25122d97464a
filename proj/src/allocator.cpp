#include "raqos/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace raqos {

void Scenario::validate() const {
  cfg.validate();
  if (users.empty()) throw std::invalid_argument("scenario needs at least one user");
  for (const auto& u : users) u.validate();
}

PowerCache::PowerCache(const Scenario& scn, int draws, std::uint64_t seed,
                       std::optional<std::vector<double>> frozen_gains, double rel_width,
                       bool with_stderr)
    : scn_(&scn),
      draws_(draws),
      n_cap_(scn.cfg.n_max),
      rel_width_(rel_width),
      with_stderr_(with_stderr) {
  if (draws < 1) throw std::invalid_argument("draw count must be >= 1");
  const int K = static_cast<int>(scn.users.size());
  if (frozen_gains && static_cast<int>(frozen_gains->size()) != K)
    throw std::invalid_argument("frozen gain vector must have one entry per user");
  gains_.resize(K);
  memo_.resize(K);
  RngStream root(seed);
  for (int u = 0; u < K; ++u) {
    bool chunked = scn.users[u].service == Service::urllc;
    std::size_t count = chunked ? static_cast<std::size_t>(draws_) * n_cap_
                                : static_cast<std::size_t>(draws_);
    if (frozen_gains) {
      // Deterministic channel: a single realization per subcarrier suffices.
      gains_[u].assign(chunked ? static_cast<std::size_t>(n_cap_) : 1, (*frozen_gains)[u]);
    } else {
      RngStream s = root.fork(u);
      gains_[u].resize(count);
      double shape = static_cast<double>(scn.cfg.n_antennas);
      for (double& g : gains_[u]) g = s.gamma(shape);
    }
  }
}

const PowerCache::Entry& PowerCache::at(int user, int n) {
  if (user < 0 || user >= static_cast<int>(memo_.size())) throw std::out_of_range("user index");
  if (n < 1 || n > n_cap_) throw std::out_of_range("subcarrier count");
  auto it = memo_[user].find(n);
  if (it != memo_[user].end()) return it->second;

  const UserSpec& u = scn_->users[user];
  std::span<const double> g(gains_[user]);
  if (u.service == Service::urllc) {
    // First n columns of each draw row (nested common random numbers).
    std::size_t rows = gains_[user].size() / static_cast<std::size_t>(n_cap_);
    static thread_local std::vector<double> buf;
    buf.resize(rows * static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < rows; ++r)
      for (int c = 0; c < n; ++c)
        buf[r * n + c] = gains_[user][r * static_cast<std::size_t>(n_cap_) + c];
    FrozenRoot root = min_power_on_draws(u, n, scn_->cfg, buf, scn_->cfg.p_max_w, rel_width_,
                                         with_stderr_);
    Entry e{root.power_w, root.capped, root.stderr_w};
    return memo_[user].emplace(n, e).first->second;
  }
  FrozenRoot root = min_power_on_draws(u, n, scn_->cfg, g, scn_->cfg.p_max_w, rel_width_,
                                       with_stderr_);
  Entry e{root.power_w, root.capped, root.stderr_w};
  return memo_[user].emplace(n, e).first->second;
}

std::map<std::pair<int, int>, double> PowerCache::snapshot() const {
  std::map<std::pair<int, int>, double> out;
  for (int u = 0; u < static_cast<int>(memo_.size()); ++u)
    for (const auto& [n, e] : memo_[u]) out[{u, n}] = e.power_w;
  return out;
}

namespace {

struct GreedyState {
  std::vector<int> n;
  std::vector<char> active;
  int total_subcarriers = 0;
};

GreedyState init_state(const Scenario& scn) {
  GreedyState st;
  const int K = static_cast<int>(scn.users.size());
  st.n.assign(K, 0);
  st.active.assign(K, 0);
  for (int k = 0; k < K; ++k) {
    if (scn.users[k].active()) {
      st.active[k] = 1;
      st.n[k] = 1;
      ++st.total_subcarriers;
    }
  }
  return st;
}

double marginal_saving(PowerCache& cache, int k, int n, int n_cap) {
  if (n + 1 > n_cap) return -std::numeric_limits<double>::infinity();
  return cache.power(k, n) - cache.power(k, n + 1);
}

AllocationResult finish(const Scenario& scn, PowerCache& cache, const GreedyState& st) {
  AllocationResult res;
  const int K = static_cast<int>(scn.users.size());
  res.alloc.n = st.n;
  res.alloc.p.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    if (!st.active[k]) continue;
    res.alloc.p[k] = cache.power(k, st.n[k]);
    res.sum_transmit_w += res.alloc.p[k];
  }
  res.total_power_w = total_power(res.sum_transmit_w, st.total_subcarriers, scn.cfg);
  res.feasible = res.sum_transmit_w <= scn.cfg.p_max_w * (1.0 + 1e-12);
  if (!res.feasible) res.limit = "transmit_power";
  res.power_fn = cache.snapshot();
  return res;
}

// Core of the algorithm pair: assign subcarriers one at a time to the user
// with the largest marginal objective saving while it stays positive.
void greedy_loop(const Scenario& scn, PowerCache& cache, GreedyState& st, double per_sub_cost) {
  const int K = static_cast<int>(scn.users.size());
  std::vector<double> delta(K, -std::numeric_limits<double>::infinity());
  for (int k = 0; k < K; ++k)
    if (st.active[k]) delta[k] = marginal_saving(cache, k, st.n[k], cache.n_cap()) - per_sub_cost;

  while (st.total_subcarriers < scn.cfg.n_max) {
    int best = -1;
    for (int k = 0; k < K; ++k) {
      if (!st.active[k]) continue;
      if (best < 0 || delta[k] > delta[best]) best = k;  // ties keep the lowest index
    }
    if (best < 0 || !(delta[best] > 0.0)) break;
    st.n[best] += 1;
    st.total_subcarriers += 1;
    delta[best] = marginal_saving(cache, best, st.n[best], cache.n_cap()) - per_sub_cost;
  }
}

}  // namespace

AllocationResult greedy_min_transmit(const Scenario& scn, PowerCache& cache) {
  scn.validate();
  GreedyState st = init_state(scn);
  if (st.total_subcarriers > scn.cfg.n_max) {
    // More active users than subcarriers; serve the first n_max of them.
    AllocationResult res;
    res.alloc.n.assign(scn.users.size(), 0);
    res.alloc.p.assign(scn.users.size(), 0.0);
    int given = 0;
    for (std::size_t k = 0; k < scn.users.size() && given < scn.cfg.n_max; ++k)
      if (st.active[k]) {
        res.alloc.n[k] = 1;
        res.alloc.p[k] = cache.power(static_cast<int>(k), 1);
        res.sum_transmit_w += res.alloc.p[k];
        ++given;
      }
    res.total_power_w = total_power(res.sum_transmit_w, given, scn.cfg);
    res.feasible = false;
    res.limit = "subcarrier_budget";
    res.power_fn = cache.snapshot();
    return res;
  }
  greedy_loop(scn, cache, st, 0.0);
  return finish(scn, cache, st);
}

AllocationResult greedy_min_total(const Scenario& scn, PowerCache& cache) {
  scn.validate();
  AllocationResult feas = greedy_min_transmit(scn, cache);

  GreedyState st = init_state(scn);
  if (st.total_subcarriers > scn.cfg.n_max) return feas;
  // Total-power saving of one extra subcarrier is dP/rho - Pca*NT; comparing
  // against the transmit saving dP keeps the argmax and scales the cost.
  double per_sub_cost = scn.cfg.amp_efficiency * scn.cfg.p_ca_w * scn.cfg.n_antennas;
  greedy_loop(scn, cache, st, per_sub_cost);

  auto sum_p = [&] {
    double s = 0.0;
    for (std::size_t k = 0; k < scn.users.size(); ++k)
      if (st.active[k]) s += cache.power(static_cast<int>(k), st.n[k]);
    return s;
  };

  // Repair: if the circuit-aware solution exceeds the transmit budget, keep
  // assigning by plain transmit saving until it fits or subcarriers run out.
  if (feas.feasible) {
    while (sum_p() > scn.cfg.p_max_w && st.total_subcarriers < scn.cfg.n_max) {
      int best = -1;
      double best_d = 0.0;
      for (std::size_t k = 0; k < scn.users.size(); ++k) {
        if (!st.active[k]) continue;
        double d = marginal_saving(cache, static_cast<int>(k), st.n[k], cache.n_cap());
        if (best < 0 || d > best_d) {
          best = static_cast<int>(k);
          best_d = d;
        }
      }
      if (best < 0 || !(best_d > 0.0)) break;
      st.n[best] += 1;
      st.total_subcarriers += 1;
    }
  }

  AllocationResult res = finish(scn, cache, st);
  res.feasible = feas.feasible && res.feasible;
  if (!feas.feasible) res.limit = feas.limit.empty() ? "transmit_power" : feas.limit;
  return res;
}

AllocationResult greedy_min_transmit(const Scenario& scn, const SolverConfig& sol,
                                     RngStream& rng) {
  PowerCache cache(scn, sol.oracle_draws, rng.next_u64(), {}, sol.bisect_rel_width);
  return greedy_min_transmit(scn, cache);
}

AllocationResult greedy_min_total(const Scenario& scn, const SolverConfig& sol, RngStream& rng) {
  PowerCache cache(scn, sol.oracle_draws, rng.next_u64(), {}, sol.bisect_rel_width);
  return greedy_min_total(scn, cache);
}

AllocationResult exhaustive_oracle(const Scenario& scn, Objective obj, PowerCache& cache,
                                   std::size_t max_combinations) {
  scn.validate();
  const int K = static_cast<int>(scn.users.size());
  std::vector<int> active_idx;
  for (int k = 0; k < K; ++k)
    if (scn.users[k].active()) active_idx.push_back(k);
  const int A = static_cast<int>(active_idx.size());
  const int n_max = scn.cfg.n_max;

  if (A == 0) {
    AllocationResult res;
    res.alloc.n.assign(K, 0);
    res.alloc.p.assign(K, 0.0);
    res.total_power_w = total_power(0.0, 0, scn.cfg);
    res.feasible = true;
    return res;
  }
  if (A > n_max) throw std::invalid_argument("more active users than subcarriers");

  // Count combinations of n_k >= 1 with sum <= n_max: C(n_max, A).
  double combos = 1.0;
  for (int i = 1; i <= A; ++i) combos = combos * (n_max - A + i) / i;
  if (combos > static_cast<double>(max_combinations))
    throw std::runtime_error("exhaustive oracle: combination budget exceeded");

  std::vector<int> cur(A, 1);
  std::vector<int> best_n;
  double best_obj = std::numeric_limits<double>::infinity();
  double best_sum_p = 0.0;
  bool best_within_cap = false;

  auto consider = [&] {
    double sum_p = 0.0;
    int sum_n = 0;
    for (int i = 0; i < A; ++i) {
      sum_p += cache.power(active_idx[i], cur[i]);
      sum_n += cur[i];
    }
    bool within_cap = sum_p <= scn.cfg.p_max_w * (1.0 + 1e-12);
    double objective = obj == Objective::transmit ? sum_p : total_power(sum_p, sum_n, scn.cfg);
    if (obj == Objective::total) {
      // Feasible allocations dominate infeasible ones; among equals, objective.
      if (best_within_cap && !within_cap) return;
      if (within_cap == best_within_cap && objective >= best_obj) return;
      if (!best_within_cap && within_cap) {
        // first feasible candidate wins regardless of objective
      }
      best_within_cap = within_cap;
    } else {
      if (objective >= best_obj) return;
      best_within_cap = within_cap;
    }
    best_obj = objective;
    best_sum_p = sum_p;
    best_n = cur;
  };

  // Depth-first enumeration of all n with n_i >= 1 and sum <= n_max.
  std::vector<int> prefix_sum(A + 1, 0);
  int depth = 0;
  for (;;) {
    if (depth == A) {
      consider();
      --depth;
      if (depth < 0) break;
      ++cur[depth];
      continue;
    }
    int remaining_min = A - depth - 1;  // one each for the rest
    if (prefix_sum[depth] + cur[depth] + remaining_min > n_max) {
      cur[depth] = 1;
      --depth;
      if (depth < 0) break;
      ++cur[depth];
      continue;
    }
    prefix_sum[depth + 1] = prefix_sum[depth] + cur[depth];
    ++depth;
  }

  AllocationResult res;
  res.alloc.n.assign(K, 0);
  res.alloc.p.assign(K, 0.0);
  int sum_n = 0;
  for (int i = 0; i < A; ++i) {
    res.alloc.n[active_idx[i]] = best_n[i];
    res.alloc.p[active_idx[i]] = cache.power(active_idx[i], best_n[i]);
    res.sum_transmit_w += res.alloc.p[active_idx[i]];
    sum_n += best_n[i];
  }
  res.total_power_w = total_power(res.sum_transmit_w, sum_n, scn.cfg);
  res.feasible = best_within_cap;
  if (!res.feasible) res.limit = "transmit_power";
  res.power_fn = cache.snapshot();
  return res;
}

ConditionReport validate_conditions(const UserSpec& user, int n_lo, int n_hi,
                                    const SystemConfig& cfg, const SolverConfig& sol,
                                    const GainModel& model, RngStream& rng) {
  if (n_lo < 1 || n_hi < n_lo || n_hi >= cfg.n_max)
    throw std::invalid_argument("need 1 <= n_lo <= n_hi < n_max");
  Scenario scn{{user}, cfg};
  std::optional<std::vector<double>> frozen;
  if (model.is_frozen()) frozen = std::vector<double>{model.mean()};
  PowerCache cache(scn, sol.oracle_draws, rng.next_u64(), frozen, sol.bisect_rel_width,
                   /*with_stderr=*/true);

  ConditionReport rep;
  std::vector<PowerCache::Entry> e;
  for (int n = n_lo; n <= n_hi + 1; ++n) e.push_back(cache.at(0, n));

  for (int i = 0; i + 1 < static_cast<int>(e.size()); ++i) {
    ConditionRow row;
    row.n = n_lo + i;
    row.power_w = e[i].power_w;
    row.stderr_w = e[i].stderr_w;
    row.delta_p_w = e[i].power_w - e[i + 1].power_w;
    double tol1 = 3.0 * std::hypot(e[i].stderr_w, e[i + 1].stderr_w);
    row.cond1_ok = row.delta_p_w > -tol1;
    if (!row.cond1_ok) ++rep.violations_cond1;
    if (i + 2 < static_cast<int>(e.size())) {
      double delta_next = e[i + 1].power_w - e[i + 2].power_w;
      double tol2 = 3.0 * std::sqrt(e[i].stderr_w * e[i].stderr_w +
                                    4.0 * e[i + 1].stderr_w * e[i + 1].stderr_w +
                                    e[i + 2].stderr_w * e[i + 2].stderr_w);
      row.cond2_ok = row.delta_p_w >= delta_next - tol2;
      if (!row.cond2_ok) ++rep.violations_cond2;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<double> urllc_power_curve_closed_form(const UserSpec& user, int n_hi,
                                                  const SystemConfig& cfg) {
  if (user.service != Service::urllc) throw std::invalid_argument("expected urllc user");
  std::vector<double> curve;
  curve.reserve(n_hi);
  for (int n = 1; n <= n_hi; ++n) curve.push_back(urllc_closed_form_power(user, n, cfg));
  return curve;
}

int urllc_closed_form_minimizer(const UserSpec& user, const SystemConfig& cfg, int n_limit) {
  double best = std::numeric_limits<double>::infinity();
  int best_n = 1;
  for (int n = 1; n <= n_limit; ++n) {
    double p = urllc_closed_form_power(user, n, cfg);
    if (p < best) {
      best = p;
      best_n = n;
    }
  }
  return best_n;
}

}  // namespace raqos

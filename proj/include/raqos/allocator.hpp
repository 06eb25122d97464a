#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "raqos/solver.hpp"

namespace raqos {

struct Scenario {
  std::vector<UserSpec> users;
  SystemConfig cfg;

  void validate() const;
};

struct AllocationResult {
  Allocation alloc;
  bool feasible = false;
  double sum_transmit_w = 0.0;
  double total_power_w = 0.0;
  std::string limit;  // constraint that blocked feasibility, if any
  // Required-power values resolved during the run, keyed by (user, n).
  std::map<std::pair<int, int>, double> power_fn;
};

// Minimum-power function P_k(n) for each user, evaluated by root finding on
// per-user frozen draws (common random numbers). Columns are nested, so the
// curve is smooth in n and greedy decisions are deterministic given the seed.
class PowerCache {
 public:
  PowerCache(const Scenario& scn, int draws, std::uint64_t seed,
             std::optional<std::vector<double>> frozen_gains = {},
             double rel_width = 1e-6, bool with_stderr = false);

  struct Entry {
    double power_w = 0.0;
    bool capped = false;
    double stderr_w = 0.0;
  };

  const Entry& at(int user, int n);
  double power(int user, int n) { return at(user, n).power_w; }
  int n_cap() const { return n_cap_; }
  const Scenario& scenario() const { return *scn_; }

  std::map<std::pair<int, int>, double> snapshot() const;

 private:
  const Scenario* scn_;
  int draws_;
  int n_cap_;
  double rel_width_;
  bool with_stderr_;
  std::vector<std::vector<double>> gains_;  // per user; urllc: draws x n_cap row-major
  std::vector<std::map<int, Entry>> memo_;
};

// Greedy minimum-transmit-power allocation: start every active user at one
// subcarrier, repeatedly give one more to the user with the largest power
// saving while the budget lasts and the best saving is positive. Feasible iff
// the resulting transmit power fits the budget.
AllocationResult greedy_min_transmit(const Scenario& scn, PowerCache& cache);

// Greedy total-power allocation: the marginal saving is reduced by the
// circuit cost P_ca N_T per subcarrier; if the result violates the transmit
// budget, keep assigning by transmit saving until it fits or the subcarriers
// run out. Feasibility is inherited from the minimum-transmit solve.
AllocationResult greedy_min_total(const Scenario& scn, PowerCache& cache);

// Convenience wrappers that build a fresh cache from the stream.
AllocationResult greedy_min_transmit(const Scenario& scn, const SolverConfig& sol, RngStream& rng);
AllocationResult greedy_min_total(const Scenario& scn, const SolverConfig& sol, RngStream& rng);

enum class Objective { transmit, total };

// Exhaustive enumeration over integer bandwidth allocations; the optimality
// reference for the greedy algorithms on desk-scale instances.
AllocationResult exhaustive_oracle(const Scenario& scn, Objective obj, PowerCache& cache,
                                   std::size_t max_combinations = 1000000);

struct ConditionRow {
  int n = 0;
  double power_w = 0.0;
  double delta_p_w = 0.0;   // P(n) - P(n+1)
  double stderr_w = 0.0;
  bool cond1_ok = true;     // P decreasing at n
  bool cond2_ok = true;     // delta P non-increasing at n
};

struct ConditionReport {
  std::vector<ConditionRow> rows;
  int violations_cond1 = 0;
  int violations_cond2 = 0;
};

// Tabulates P(n) and the marginal saving over [n_lo, n_hi] and flags
// monotonicity violations beyond 3 sigma of the Monte Carlo error.
ConditionReport validate_conditions(const UserSpec& user, int n_lo, int n_hi,
                                    const SystemConfig& cfg, const SolverConfig& sol,
                                    const GainModel& model, RngStream& rng);

// Closed-form URLLC power curve over [1, n_hi]; exact, no Monte Carlo.
std::vector<double> urllc_power_curve_closed_form(const UserSpec& user, int n_hi,
                                                  const SystemConfig& cfg);

// Subcarrier count minimizing the closed-form URLLC power curve.
int urllc_closed_form_minimizer(const UserSpec& user, const SystemConfig& cfg, int n_limit);

}  // namespace raqos

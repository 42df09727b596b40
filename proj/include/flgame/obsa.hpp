#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flgame/marl.hpp"

// Budget binary search: find the LMO budget at which the trained workers'
// realized data collection matches the theoretical optimum within the
// tolerance. The search itself only needs a budget -> (data, paid) probe,
// so test doubles can stand in for the full environment.

namespace flgame {

struct ObsaOptions {
  int eval_episodes = 16;          // probe averaging, tames stochastic policies
  int max_bisections = 40;
  double relative_tolerance = 0.05;  // of zeta_target
  bool absolute_tolerance = false;   // use SystemParams::obsa_tolerance instead
  bool monotonicity_check = true;
  int eval_parallelism = 1;
};

struct ObsaProbeResult {
  double total_data = 0.0;
  double total_paid = 0.0;
};

using BudgetProbe = std::function<ObsaProbeResult(double budget)>;

enum class ObsaDiagnostic { none, target_exceeds_capacity, max_bisections_reached };

inline const char* to_string(ObsaDiagnostic d) {
  switch (d) {
    case ObsaDiagnostic::target_exceeds_capacity: return "target exceeds worker capacity";
    case ObsaDiagnostic::max_bisections_reached: return "max bisections reached";
    default: return "";
  }
}

struct ObsaIteration {
  int iter = 0;
  double b_mid = 0.0;
  double total_data = 0.0;
  double total_paid = 0.0;
};

struct ObsaResult {
  double budget_star = 0.0;
  double total_paid = 0.0;
  double total_data = 0.0;
  int iterations = 0;
  bool converged = false;
  ObsaDiagnostic diagnostic = ObsaDiagnostic::none;
  bool monotonicity_warning = false;
  std::vector<ObsaIteration> trace;
};

// Core bisection over [0, tau]. Probes the midpoint, halves the interval
// toward the side indicated by realized vs target data, stops when the
// realized total is within tolerance. Non-convergence returns the best-seen
// midpoint rather than looping forever.
inline ObsaResult obsa_search(const BudgetProbe& probe, double tau, double zeta_target,
                              double tolerance, const ObsaOptions& opts = {}) {
  if (!(tau > 0)) throw DomainError("obsa_search: tau must be > 0");
  if (!(zeta_target > 0)) throw DomainError("obsa_search: zeta_target must be > 0");
  if (!(tolerance > 0)) throw DomainError("obsa_search: tolerance must be > 0");

  ObsaResult res;
  if (opts.monotonicity_check) {
    const auto low = probe(tau * 0x1p-20);
    const auto high = probe(tau);
    res.monotonicity_warning = high.total_data < low.total_data;
  }

  double lo = 0.0;
  double hi = tau;
  double best_err = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= opts.max_bisections; ++k) {
    const double mid = (lo + hi) / 2.0;
    const auto r = probe(mid);
    res.trace.push_back({k, mid, r.total_data, r.total_paid});
    res.iterations = k;
    const double err = std::abs(r.total_data - zeta_target);
    if (err < best_err) {
      best_err = err;
      res.budget_star = mid;
      res.total_data = r.total_data;
      res.total_paid = r.total_paid;
    }
    if (err < tolerance) {
      res.converged = true;
      return res;
    }
    if (r.total_data > zeta_target)
      hi = mid;
    else
      lo = mid;
  }
  res.diagnostic = ObsaDiagnostic::max_bisections_reached;
  return res;
}

inline double resolve_obsa_tolerance(double zeta_target, const SystemParams& params,
                                     const ObsaOptions& opts) {
  return opts.absolute_tolerance ? params.obsa_tolerance
                                 : opts.relative_tolerance * zeta_target;
}

// Full search against the simulated worker pool. The same evaluation seeds
// are reused at every midpoint (common random numbers), so the probe is a
// deterministic function of the budget.
inline ObsaResult obsa(int worker_count, double tau, double zeta_target, const Policy& policy,
                       const EnvConfig& env_template, const SystemParams& params,
                       const ObsaOptions& opts = {}) {
  if (!(tau > 0)) throw DomainError("obsa: tau must be > 0");
  if (!(zeta_target > 0)) throw DomainError("obsa: zeta_target must be > 0");
  if (worker_count < 1) throw ContractError("obsa: worker_count must be >= 1");

  // no budget can buy more than every worker filled to capacity
  if (zeta_target > static_cast<double>(worker_count) * env_template.capacity) {
    ObsaResult res;
    res.diagnostic = ObsaDiagnostic::target_exceeds_capacity;
    return res;
  }

  const BudgetProbe probe = [&](double budget) {
    EnvConfig cfg = env_template;
    cfg.worker_count = worker_count;
    cfg.budget = budget;
    cfg.params = params;
    const auto eval = evaluate(policy, cfg, opts.eval_episodes, ActionMode::sample,
                               opts.eval_parallelism);
    return ObsaProbeResult{eval.mean_total_data, eval.mean_total_paid};
  };
  return obsa_search(probe, tau, zeta_target, resolve_obsa_tolerance(zeta_target, params, opts),
                     opts);
}

}  // namespace flgame

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "flgame/obsa.hpp"
#include "flgame/stackelberg.hpp"

// Outer fixed-point loop coupling the closed-form Stackelberg layer to
// realized worker behavior. Each iteration: solve the equilibrium at the
// current unit prices, eliminate LMOs with non-positive strategies, search
// the actual budget each remaining LMO needs, then update every unit price
// to the realized average cost paid per data unit. Also hosts the fixed and
// random pricing baselines, which take the same worker layer but skip the
// price iteration.

namespace flgame {

struct AsosaOptions {
  int max_iterations = 50;
  bool absolute_tolerance = false;   // use SystemParams::conv_tolerance
  double relative_tolerance = 1e-3;  // of the current total-data optimum
  ObsaOptions obsa;
};

// Worker-side evaluation behind the budget search. The simulation layer runs
// trained policies on the environment; the linear layer is the deterministic
// test double (data = c * budget, paid = budget).
class WorkerLayer {
 public:
  virtual ~WorkerLayer() = default;
  virtual ObsaResult run_obsa(int iteration, int lmo_index, const LmoProfile& profile, double tau,
                              double zeta_target, double budget_theory,
                              const SystemParams& params) = 0;
};

class LinearWorkerLayer final : public WorkerLayer {
 public:
  explicit LinearWorkerLayer(std::vector<double> coefficients, ObsaOptions opts = {})
      : coefficients_(std::move(coefficients)), opts_(opts) {
    for (double c : coefficients_)
      if (!(c > 0)) throw ConfigError("LinearWorkerLayer: coefficients must be > 0");
  }

  ObsaResult run_obsa(int, int lmo_index, const LmoProfile&, double tau, double zeta_target,
                      double, const SystemParams& params) override {
    const double c = coefficients_.at(static_cast<std::size_t>(lmo_index));
    const BudgetProbe probe = [c](double budget) { return ObsaProbeResult{c * budget, budget}; };
    return obsa_search(probe, tau, zeta_target, resolve_obsa_tolerance(zeta_target, params, opts_),
                       opts_);
  }

 private:
  std::vector<double> coefficients_;
  ObsaOptions opts_;
};

class SimWorkerLayer final : public WorkerLayer {
 public:
  SimWorkerLayer(std::vector<std::shared_ptr<const Policy>> policies, EnvConfig env_template,
                 ObsaOptions opts = {})
      : policies_(std::move(policies)), env_template_(std::move(env_template)), opts_(opts) {}

  // Retrain each LMO's policy at the start of every iteration instead of
  // keeping the pre-trained one frozen. Costly; off unless asked for.
  void enable_retraining(TrainConfig base) {
    retrain_ = true;
    train_cfg_ = std::move(base);
  }

  ObsaResult run_obsa(int iteration, int lmo_index, const LmoProfile& profile, double tau,
                      double zeta_target, double budget_theory,
                      const SystemParams& params) override {
    EnvConfig cfg = env_template_;
    cfg.worker_count = profile.worker_count;
    cfg.params = params;
    cfg.seed = rng::mix({env_template_.seed, static_cast<std::uint64_t>(rng::Stream::scenario),
                         static_cast<std::uint64_t>(lmo_index)});
    const Policy* policy = policies_.at(static_cast<std::size_t>(lmo_index)).get();
    MlpPolicy retrained;
    if (retrain_) {
      TrainConfig tc = train_cfg_;
      tc.seed = rng::mix({train_cfg_.seed, static_cast<std::uint64_t>(lmo_index),
                          static_cast<std::uint64_t>(iteration)});
      EnvConfig train_env = cfg;
      train_env.budget = budget_theory > 0 ? budget_theory : tau;
      retrained = train(train_env, tc).policy;
      policy = &retrained;
    }
    return obsa(profile.worker_count, tau, zeta_target, *policy, cfg, params, opts_);
  }

 private:
  std::vector<std::shared_ptr<const Policy>> policies_;
  EnvConfig env_template_;
  ObsaOptions opts_;
  bool retrain_ = false;
  TrainConfig train_cfg_;
};

enum class AsosaTermination { converged, tau_nonpositive, max_iterations };

inline const char* to_string(AsosaTermination t) {
  switch (t) {
    case AsosaTermination::converged: return "converged";
    case AsosaTermination::tau_nonpositive: return "tau_nonpositive";
    default: return "max_iterations";
  }
}

// One trace row per (iteration, LMO), mirroring the trace CSV schema.
struct AsosaLmoRecord {
  int iteration = 0;
  int lmo = 0;
  double price = 0.0;          // price in effect when the iteration started
  double zeta_theory = 0.0;
  double budget_theory = 0.0;
  double budget_actual = 0.0;
  double total_paid = 0.0;
  double total_data = 0.0;
  double lmo_utility = 0.0;
  double tau = 0.0;
  double tp_utility = 0.0;
  std::string status;  // active | eliminated | eliminated_capacity | eliminated_no_data | infeasible
};

struct AsosaTrace {
  std::vector<AsosaLmoRecord> rows;
  AsosaTermination termination = AsosaTermination::max_iterations;
  std::string diagnostic;
  int iterations = 0;
  std::vector<int> final_active_ids;
  std::vector<double> final_prices;
  std::vector<double> final_zetas;
  double final_tau = 0.0;
  double final_tp_utility = 0.0;
  double final_total_data = 0.0;
};

namespace detail {

struct ActiveLmo {
  int original_index = 0;
  LmoProfile profile;
  double price = 0.0;
};

}  // namespace detail

inline AsosaTrace asosa(const std::vector<LmoProfile>& profiles, WorkerLayer& layer,
                        const SystemParams& params, const AsosaOptions& opts = {}) {
  params.validate();
  if (profiles.size() < 2) throw MechanismUndefinedError("asosa: need at least two LMOs");

  std::vector<detail::ActiveLmo> active;
  active.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    profiles[i].validate();
    active.push_back({static_cast<int>(i), profiles[i], profiles[i].price});
  }

  AsosaTrace trace;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    trace.iterations = iter;

    // Stackelberg phase; restarts with the reduced set after an elimination
    // so one trace row never mixes stale membership.
    double tau = 0.0;
    std::vector<double> zetas;
    bool eliminated_this_iter = false;
    for (;;) {
      if (active.size() < 2) {
        trace.termination = AsosaTermination::tau_nonpositive;
        trace.diagnostic = "fewer than two active LMOs remain";
        return trace;
      }
      std::vector<double> prices;
      prices.reserve(active.size());
      for (const auto& a : active) prices.push_back(a.price);
      tau = optimal_tau(prices, params);
      if (!(tau > 0)) {
        trace.termination = AsosaTermination::tau_nonpositive;
        trace.diagnostic = "optimal tau non-positive";
        return trace;
      }
      zetas.clear();
      for (const auto& a : active) zetas.push_back(optimal_zeta_at_tau(tau, a.price, params));

      std::vector<std::size_t> exits;
      for (std::size_t m = 0; m < active.size(); ++m)
        if (zetas[m] <= 0) exits.push_back(m);
      if (exits.empty()) break;

      eliminated_this_iter = true;
      const double z_theory = optimal_total_data_at_tau(tau, params);
      const double tp_theory = tp_utility(tau, z_theory, params);
      for (std::size_t m : exits) {
        AsosaLmoRecord row;
        row.iteration = iter;
        row.lmo = active[m].profile.id;
        row.price = active[m].price;
        row.zeta_theory = zetas[m];
        row.budget_theory = optimal_budget(tau, active[m].price, params);
        row.lmo_utility = row.budget_theory - active[m].price * zetas[m] -
                          active[m].profile.fixed_cost;
        row.tau = tau;
        row.tp_utility = tp_theory;
        row.status = "eliminated";
        trace.rows.push_back(std::move(row));
      }
      for (auto it = exits.rbegin(); it != exits.rend(); ++it)
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(*it));
    }

    const double z_star = optimal_total_data_at_tau(tau, params);

    // worker phase: budget search per LMO, realized totals, price updates
    const std::size_t first_row = trace.rows.size();
    std::vector<std::size_t> to_remove;
    double realized_total = 0.0;
    for (std::size_t m = 0; m < active.size(); ++m) {
      auto& lmo = active[m];
      AsosaLmoRecord row;
      row.iteration = iter;
      row.lmo = lmo.profile.id;
      row.price = lmo.price;
      row.zeta_theory = zetas[m];
      row.budget_theory = optimal_budget(tau, lmo.price, params);
      row.tau = tau;
      const ObsaResult res = layer.run_obsa(iter, lmo.original_index, lmo.profile, tau, zetas[m],
                                            row.budget_theory, params);
      row.budget_actual = res.budget_star;
      row.total_paid = res.total_paid;
      row.total_data = res.total_data;
      row.lmo_utility = row.budget_theory - res.total_paid - lmo.profile.fixed_cost;
      realized_total += res.total_data;
      if (res.diagnostic == ObsaDiagnostic::target_exceeds_capacity) {
        row.status = "eliminated_capacity";
        to_remove.push_back(m);
      } else if (!(res.total_data > 0)) {
        row.status = "eliminated_no_data";
        to_remove.push_back(m);
      } else {
        row.status = "active";
        lmo.price = res.total_paid / res.total_data;  // realized unit cost
      }
      trace.rows.push_back(std::move(row));
    }
    const double tp_realized = tp_utility(tau, realized_total, params);
    for (std::size_t r = first_row; r < trace.rows.size(); ++r)
      trace.rows[r].tp_utility = tp_realized;

    const std::vector<std::size_t> removed = to_remove;
    eliminated_this_iter = eliminated_this_iter || !to_remove.empty();
    std::vector<double> active_zetas;
    for (std::size_t m = 0; m < active.size(); ++m) {
      bool gone = false;
      for (std::size_t r : removed) gone = gone || r == m;
      if (!gone) active_zetas.push_back(zetas[m]);
    }
    for (auto it = to_remove.rbegin(); it != to_remove.rend(); ++it)
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(*it));

    // Convergence: with stable membership, the strategies implied by the
    // freshly updated prices must match this iteration's within tolerance.
    const double tol =
        opts.absolute_tolerance ? params.conv_tolerance : opts.relative_tolerance * z_star;
    bool converged = !eliminated_this_iter && active.size() >= 2;
    if (converged) {
      std::vector<double> next_prices;
      for (const auto& a : active) next_prices.push_back(a.price);
      const double next_tau = optimal_tau(next_prices, params);
      if (!(next_tau > 0)) {
        converged = false;
      } else {
        for (std::size_t m = 0; m < active.size(); ++m) {
          const double next_zeta = optimal_zeta_at_tau(next_tau, active[m].price, params);
          if (!(next_zeta > 0) || std::abs(next_zeta - active_zetas[m]) >= tol) {
            converged = false;
            break;
          }
        }
      }
    }

    trace.final_tau = tau;
    trace.final_tp_utility = tp_realized;
    trace.final_total_data = realized_total;
    trace.final_active_ids.clear();
    trace.final_prices.clear();
    trace.final_zetas = active_zetas;
    for (const auto& a : active) {
      trace.final_active_ids.push_back(a.profile.id);
      trace.final_prices.push_back(a.price);
    }

    if (converged) {
      trace.termination = AsosaTermination::converged;
      return trace;
    }
  }
  trace.termination = AsosaTermination::max_iterations;
  return trace;
}

// Convenience overload wiring trained policies and an environment template
// into the simulation layer.
inline AsosaTrace asosa(const std::vector<LmoProfile>& profiles,
                        std::vector<std::shared_ptr<const Policy>> policies,
                        const SystemParams& params, const EnvConfig& env_template,
                        const AsosaOptions& opts = {}) {
  SimWorkerLayer layer(std::move(policies), env_template, opts.obsa);
  return asosa(profiles, layer, params, opts);
}

struct SchemeOutcome {
  std::string scheme;
  int m_count = 0;
  double tau = 0.0;
  double tp_utility = 0.0;
  double total_data = 0.0;
  bool terminated = false;
  std::string diagnostic;
  std::vector<AsosaLmoRecord> rows;
};

// Single-pass scheme: equilibrium at the given prices, one budget search per
// feasible LMO, no price iteration.
inline SchemeOutcome run_with_prices(const std::string& scheme,
                                     const std::vector<LmoProfile>& profiles,
                                     const std::vector<double>& prices, const SystemParams& params,
                                     WorkerLayer& layer) {
  if (profiles.size() < 2) throw MechanismUndefinedError("pricing scheme: need at least two LMOs");
  if (prices.size() != profiles.size())
    throw ContractError("pricing scheme: price vector length mismatch");

  SchemeOutcome out;
  out.scheme = scheme;
  out.m_count = static_cast<int>(profiles.size());
  out.tau = optimal_tau(prices, params);
  if (!(out.tau > 0)) {
    out.terminated = true;
    out.diagnostic = "optimal tau non-positive";
    return out;
  }
  double realized_total = 0.0;
  for (std::size_t m = 0; m < profiles.size(); ++m) {
    AsosaLmoRecord row;
    row.iteration = 1;
    row.lmo = profiles[m].id;
    row.price = prices[m];
    row.zeta_theory = optimal_zeta_at_tau(out.tau, prices[m], params);
    row.budget_theory = optimal_budget(out.tau, prices[m], params);
    row.tau = out.tau;
    if (row.zeta_theory <= 0) {
      row.status = "infeasible";
      row.lmo_utility = row.budget_theory - prices[m] * row.zeta_theory - profiles[m].fixed_cost;
    } else {
      LmoProfile priced = profiles[m];
      priced.price = prices[m];
      const ObsaResult res = layer.run_obsa(1, static_cast<int>(m), priced, out.tau,
                                            row.zeta_theory, row.budget_theory, params);
      row.budget_actual = res.budget_star;
      row.total_paid = res.total_paid;
      row.total_data = res.total_data;
      row.lmo_utility = row.budget_theory - res.total_paid - profiles[m].fixed_cost;
      row.status = res.diagnostic == ObsaDiagnostic::target_exceeds_capacity
                       ? "eliminated_capacity"
                       : "active";
      realized_total += res.total_data;
    }
    out.rows.push_back(std::move(row));
  }
  out.total_data = realized_total;
  out.tp_utility = tp_utility(out.tau, realized_total, params);
  for (auto& row : out.rows) row.tp_utility = out.tp_utility;
  return out;
}

inline SchemeOutcome run_fixed_pricing(const std::vector<LmoProfile>& profiles, double price,
                                       const SystemParams& params, WorkerLayer& layer) {
  if (!(price > 0)) throw DomainError("run_fixed_pricing: price must be > 0");
  std::vector<double> prices(profiles.size(), price);
  return run_with_prices("fixed", profiles, prices, params, layer);
}

inline SchemeOutcome run_random_pricing(const std::vector<LmoProfile>& profiles, double hi,
                                        std::uint64_t seed, const SystemParams& params,
                                        WorkerLayer& layer) {
  if (!(hi > 0)) throw DomainError("run_random_pricing: hi must be > 0");
  std::vector<double> prices(profiles.size());
  for (std::size_t m = 0; m < prices.size(); ++m)
    prices[m] = hi * rng::uniform({seed, static_cast<std::uint64_t>(rng::Stream::price),
                                   static_cast<std::uint64_t>(m)});
  return run_with_prices("random", profiles, prices, params, layer);
}

}  // namespace flgame

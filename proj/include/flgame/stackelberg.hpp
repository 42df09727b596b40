#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "flgame/incentive.hpp"

// Closed-form Stackelberg equilibrium between the TP (leader, picks budget
// tau) and the LMOs (followers, pick data contributions zeta). Followers are
// in a Nash equilibrium among themselves at the leader's optimum.

namespace flgame {

namespace detail {
inline void check_prices(std::span<const double> prices) {
  if (prices.size() < 2)
    throw MechanismUndefinedError("equilibrium requires at least two LMOs");
  for (double p : prices)
    if (!(p > 0)) throw DomainError("LMO price must be > 0");
}

inline double price_sum(std::span<const double> prices) {
  double s = 0.0;
  for (double p : prices) s += p;
  return s;
}
}  // namespace detail

// Nash-equilibrium total data for a given budget: (M-1) * tau / sum(P).
inline double optimal_total_data(double tau, std::span<const double> prices) {
  detail::check_prices(prices);
  if (!(tau > 0)) throw DomainError("optimal_total_data: tau must be > 0");
  return (static_cast<double>(prices.size()) - 1.0) * tau / detail::price_sum(prices);
}

// One LMO's best response to a fixed total: Z - P*Z^2/tau. May be negative;
// a non-positive value means the LMO should exit.
inline double best_response_zeta(double z_total, double price, double tau) {
  if (!(z_total > 0)) throw DomainError("best_response_zeta: z_total must be > 0");
  if (!(tau > 0)) throw DomainError("best_response_zeta: tau must be > 0");
  return z_total - price * z_total * z_total / tau;
}

// Equilibrium contribution of LMO m at budget tau, in terms of prices only.
inline double optimal_zeta(double tau, std::span<const double> prices, std::size_t m) {
  detail::check_prices(prices);
  if (!(tau > 0)) throw DomainError("optimal_zeta: tau must be > 0");
  if (m >= prices.size()) throw ContractError("optimal_zeta: LMO index out of range");
  const double mm1 = static_cast<double>(prices.size()) - 1.0;
  const double sum = detail::price_sum(prices);
  return (mm1 * tau / sum) * (1.0 - mm1 * prices[m] / sum);
}

// Leader's optimum: lambda*alpha - sum(P) / (beta * (M-1)). Non-positive
// values signal that the game terminates.
inline double optimal_tau(std::span<const double> prices, const SystemParams& p) {
  detail::check_prices(prices);
  return p.lambda * p.alpha -
         detail::price_sum(prices) / (p.beta * (static_cast<double>(prices.size()) - 1.0));
}

// Equilibrium contribution expressed through tau alone:
// tau * ((la - tau) * beta - P) / ((la - tau) * beta)^2 with la = lambda*alpha.
// Agrees with optimal_zeta exactly at tau = optimal_tau.
inline double optimal_zeta_at_tau(double tau, double price, const SystemParams& p) {
  const double c = (p.lambda * p.alpha - tau) * p.beta;
  if (!(c > 0)) throw DomainError("optimal_zeta_at_tau: (lambda*alpha - tau)*beta must be > 0");
  return tau * (c - price) / (c * c);
}

// Equilibrium total data expressed through tau alone: tau / ((la - tau)*beta).
inline double optimal_total_data_at_tau(double tau, const SystemParams& p) {
  const double c = (p.lambda * p.alpha - tau) * p.beta;
  if (!(c > 0)) throw DomainError("optimal_total_data_at_tau: (lambda*alpha - tau)*beta must be > 0");
  return tau / c;
}

// Budget share of an LMO at the equilibrium: (1 - P/((la - tau)*beta)) * tau.
inline double optimal_budget(double tau, double price, const SystemParams& p) {
  const double c = (p.lambda * p.alpha - tau) * p.beta;
  if (!(c > 0)) throw DomainError("optimal_budget: (lambda*alpha - tau)*beta must be > 0");
  return (1.0 - price / c) * tau;
}

// Feasible price range at budget tau is the open interval (0, (la - tau)*beta).
inline bool price_feasible(double price, double tau, const SystemParams& p) {
  const double c = (p.lambda * p.alpha - tau) * p.beta;
  return price > 0 && price < c;
}

struct LmoEquilibrium {
  int id = 0;
  double zeta_star = 0.0;         // negative values kept as-is (exit signal)
  double budget = 0.0;
  double predicted_utility = 0.0;
  bool feasible = false;          // price inside the open feasible interval
};

struct EquilibriumSolution {
  double tau_star = 0.0;
  double z_star = 0.0;
  double tp_utility = 0.0;
  std::vector<LmoEquilibrium> per_lmo;
  bool terminated = false;        // tau_star <= 0: the game does not run
  bool global_feasible = false;   // tau_star > 0
};

// Full equilibrium for a set of LMOs. Does not eliminate infeasible LMOs;
// negative strategies are reported so the caller can log the exit cause.
inline EquilibriumSolution solve_equilibrium(const std::vector<LmoProfile>& profiles,
                                             const SystemParams& params) {
  std::vector<double> prices;
  prices.reserve(profiles.size());
  for (const auto& lmo : profiles) prices.push_back(lmo.price);

  EquilibriumSolution sol;
  sol.tau_star = optimal_tau(prices, params);
  if (!(sol.tau_star > 0)) {
    sol.terminated = true;
    sol.global_feasible = false;
    sol.tp_utility = 0.0;
    return sol;
  }
  sol.global_feasible = true;
  sol.z_star = optimal_total_data(sol.tau_star, prices);
  sol.tp_utility = tp_utility(sol.tau_star, sol.z_star, params);
  sol.per_lmo.reserve(profiles.size());
  for (std::size_t m = 0; m < profiles.size(); ++m) {
    LmoEquilibrium e;
    e.id = profiles[m].id;
    e.zeta_star = optimal_zeta(sol.tau_star, prices, m);
    e.budget = optimal_budget(sol.tau_star, prices[m], params);
    e.feasible = price_feasible(prices[m], sol.tau_star, params);
    e.predicted_utility = e.budget - profiles[m].price * e.zeta_star - profiles[m].fixed_cost;
    sol.per_lmo.push_back(e);
  }
  return sol;
}

struct FirstOrderReport {
  double max_lmo_deviation = 0.0;       // max |dU_m/dzeta_m| at the optimum
  double tp_deviation = 0.0;            // |dU_TP/dtau| at the optimum
  std::vector<double> lmo_derivatives;  // signed, one per LMO
};

// Numerical check that the closed forms sit at stationary points: central
// finite differences of each follower's utility in its own strategy (others
// fixed) and of the leader's utility in tau (followers re-solving).
inline FirstOrderReport verify_first_order(const EquilibriumSolution& sol,
                                           const std::vector<LmoProfile>& profiles,
                                           const SystemParams& params) {
  if (sol.terminated) throw ContractError("verify_first_order: terminated solution");
  FirstOrderReport report;
  report.lmo_derivatives.reserve(profiles.size());

  for (std::size_t m = 0; m < profiles.size(); ++m) {
    const double zm = sol.per_lmo[m].zeta_star;
    const double others = sol.z_star - zm;
    const auto utility = [&](double z) {
      return (z / (z + others)) * sol.tau_star - profiles[m].price * z - profiles[m].fixed_cost;
    };
    const double h = 1e-6 * std::max(1.0, std::abs(zm));
    const double d = (utility(zm + h) - utility(zm - h)) / (2.0 * h);
    report.lmo_derivatives.push_back(d);
    report.max_lmo_deviation = std::max(report.max_lmo_deviation, std::abs(d));
  }

  std::vector<double> prices;
  prices.reserve(profiles.size());
  for (const auto& lmo : profiles) prices.push_back(lmo.price);
  const auto leader_utility = [&](double tau) {
    return tp_utility(tau, optimal_total_data(tau, prices), params);
  };
  const double h = 1e-6 * std::max(1.0, std::abs(sol.tau_star));
  report.tp_deviation =
      std::abs((leader_utility(sol.tau_star + h) - leader_utility(sol.tau_star - h)) / (2.0 * h));
  return report;
}

}  // namespace flgame

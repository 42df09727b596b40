#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "flgame/errors.hpp"

// Scalar utility and fatigue formulas of the three-tier incentive mechanism:
// task publisher (TP) <- local model owners (LMOs) <- workers. Everything in
// this header is a pure function over explicit parameter records.

namespace flgame {

struct SystemParams {
  double lambda = 1.0;           // accuracy-to-revenue conversion, > 0
  double alpha = 10.0;           // accuracy curve scale, > 0
  double beta = 1.0;             // accuracy curve rate per data unit, > 0
  double theta = 0.5;            // base participation reward scale, >= 0
  double phi = -0.05;            // non-participation penalty, <= 0
  double fatigue_epsilon = 0.1;  // fatigue range, > 0
  double fatigue_gamma = -10.0;  // fatigue rate; sign controls direction
  double fatigue_delta = 0.5;    // fatigue midpoint in data units
  double obsa_tolerance = 0.05;  // absolute data tolerance for budget search, > 0
  double conv_tolerance = 1e-3;  // absolute strategy-convergence tolerance, > 0

  void validate() const {
    if (!(lambda > 0)) throw ConfigError("SystemParams: lambda must be > 0");
    if (!(alpha > 0)) throw ConfigError("SystemParams: alpha must be > 0");
    if (!(beta > 0)) throw ConfigError("SystemParams: beta must be > 0");
    if (!(theta >= 0)) throw ConfigError("SystemParams: theta must be >= 0");
    if (!(phi <= 0)) throw ConfigError("SystemParams: phi must be <= 0");
    if (!(fatigue_epsilon > 0)) throw ConfigError("SystemParams: fatigue_epsilon must be > 0");
    if (!std::isfinite(fatigue_gamma)) throw ConfigError("SystemParams: fatigue_gamma must be finite");
    if (!std::isfinite(fatigue_delta)) throw ConfigError("SystemParams: fatigue_delta must be finite");
    if (!(obsa_tolerance > 0)) throw ConfigError("SystemParams: obsa_tolerance must be > 0");
    if (!(conv_tolerance > 0)) throw ConfigError("SystemParams: conv_tolerance must be > 0");
  }
};

struct LmoProfile {
  int id = 0;              // 1-based index
  double price = 1.0;      // P_m, unit data purchase cost, > 0
  double fixed_cost = 0.0; // E_m, non-data cost, >= 0
  int worker_count = 1;    // W_m, >= 1

  void validate() const {
    if (!(price > 0)) throw ConfigError("LmoProfile: price must be > 0");
    if (!(fixed_cost >= 0)) throw ConfigError("LmoProfile: fixed_cost must be >= 0");
    if (worker_count < 1) throw ConfigError("LmoProfile: worker_count must be >= 1");
  }
};

struct LmoOutcome {
  double zeta = 0.0;    // data contribution
  double budget = 0.0;  // share of the TP budget
  double utility = 0.0;
};

// Model-accuracy gain from z total data units: alpha * ln(1 + beta * z).
// Strictly increasing, strictly concave.
inline double accuracy_gain(double z, const SystemParams& p) {
  if (!(z >= 0)) throw DomainError("accuracy_gain: z must be >= 0");
  return p.alpha * std::log1p(p.beta * z);
}

// TP utility: revenue from accuracy minus the announced budget.
inline double tp_utility(double tau, double z, const SystemParams& p) {
  if (!(tau >= 0)) throw DomainError("tp_utility: tau must be >= 0");
  return p.lambda * accuracy_gain(z, p) - tau;
}

// Budget share allocated to an LMO contributing zeta of z_total data.
inline double lmo_budget(double zeta, double z_total, double tau) {
  if (z_total == 0) throw DomainError("lmo_budget: z_total is zero");
  if (!(z_total > 0)) throw DomainError("lmo_budget: z_total must be > 0");
  if (!(zeta >= 0) || zeta > z_total) throw DomainError("lmo_budget: need 0 <= zeta <= z_total");
  return (zeta / z_total) * tau;
}

// LMO utility: budget share minus worker payments minus fixed cost.
inline double lmo_utility(double zeta, double tau, double z_total, const LmoProfile& lmo) {
  return lmo_budget(zeta, z_total, tau) - lmo.price * zeta - lmo.fixed_cost;
}

inline LmoOutcome lmo_outcome(double zeta, double z_total, double tau, const LmoProfile& lmo) {
  LmoOutcome out;
  out.zeta = zeta;
  out.budget = lmo_budget(zeta, z_total, tau);
  out.utility = out.budget - lmo.price * zeta - lmo.fixed_cost;
  return out;
}

// Worker fatigue as a function of data contributed so far. Implemented
// literally with the embedded -0.5 shift; the sign of gamma decides whether
// fatigue grows or shrinks with d. Output is strictly inside (0, epsilon).
inline double fatigue(double d, const SystemParams& p) {
  if (!(d >= 0)) throw DomainError("fatigue: d must be >= 0");
  return p.fatigue_epsilon / (1.0 + std::exp(-(p.fatigue_gamma * (d - p.fatigue_delta) - 0.5)));
}

// Base participation reward, growing as the LMO budget is spent down.
inline double base_reward(double remaining, double budget, const SystemParams& p) {
  if (!(budget > 0)) throw DomainError("base_reward: budget must be > 0");
  if (!(remaining >= 0) || remaining > budget)
    throw DomainError("base_reward: need 0 <= remaining <= budget");
  return p.theta * (1.0 - remaining / budget);
}

// Single-shot worker utility: proportional budget share plus base reward
// minus fatigue. This is the one-round payoff form; the episodic environment
// pays out of the remaining budget instead and reports this as a diagnostic.
inline double worker_utility(double d_i, double d_sum, double budget, double remaining,
                             const SystemParams& p) {
  if (!(d_sum > 0)) throw DomainError("worker_utility: d_sum must be > 0");
  if (!(d_i >= 0) || d_i > d_sum) throw DomainError("worker_utility: need 0 <= d_i <= d_sum");
  return (d_i / d_sum) * budget + base_reward(remaining, budget, p) - fatigue(d_i, p);
}

}  // namespace flgame

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "flgame/incentive.hpp"
#include "flgame/rng.hpp"

// Episodic multi-agent environment for one LMO's worker pool. Workers share
// a depleting budget: each step every worker either participates (drawing a
// stochastic data contribution and earning a share of the step's payout
// pool) or abstains (earning the penalty phi). Agents observe the fatigue
// vector of all workers plus the remaining-budget ratio, nothing else.

namespace flgame {

struct EnvConfig {
  int worker_count = 1;
  double budget = 1.0;             // episode budget B, > 0
  double payout_rate = 0.1;         // kappa in (0,1]: share of remaining budget paid per step
  double contribution_mean = 0.25;  // per-step contribution draw, clamped below at 0
  double contribution_std = 0.0625;
  double capacity = 10.0;           // per-worker cumulative data cap, > 0
  int max_steps = 20;
  std::uint64_t seed = 0;
  SystemParams params;
  bool paid_is_reward_sum = false;  // alternative accounting for episode totals

  void validate() const {
    params.validate();
    if (worker_count < 1) throw ConfigError("EnvConfig: worker_count must be >= 1");
    if (!(budget > 0)) throw ConfigError("EnvConfig: budget must be > 0");
    if (!(payout_rate > 0) || payout_rate > 1)
      throw ConfigError("EnvConfig: payout_rate must be in (0,1]");
    if (!(contribution_mean >= 0)) throw ConfigError("EnvConfig: contribution_mean must be >= 0");
    if (!(contribution_std >= 0)) throw ConfigError("EnvConfig: contribution_std must be >= 0");
    if (!(capacity > 0)) throw ConfigError("EnvConfig: capacity must be > 0");
    if (max_steps < 1) throw ConfigError("EnvConfig: max_steps must be >= 1");
  }
};

struct EnvState {
  std::vector<double> fatigue;          // observed
  double remaining_ratio = 1.0;         // observed
  std::vector<double> cumulative_data;  // internal, not part of the observation
  int step = 0;
};

struct Transition {
  std::vector<int> actions;
  std::vector<double> contributions;  // 0 for abstainers
  std::vector<double> rewards;
  EnvState next_state;
  bool done = false;
  double pool = 0.0;  // budget disbursed this step
};

class WorkerEnv {
 public:
  explicit WorkerEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    reset();
  }

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }
  bool done() const { return done_; }
  double remaining_budget() const { return remaining_; }
  int observation_size() const { return cfg_.worker_count + 1; }

  // Exactly {f_1..f_W, remaining_ratio}.
  std::vector<double> observation() const {
    std::vector<double> obs(state_.fatigue);
    obs.push_back(state_.remaining_ratio);
    return obs;
  }

  EnvState reset() {
    const int w = cfg_.worker_count;
    state_.fatigue.assign(w, fatigue(0.0, cfg_.params));
    state_.cumulative_data.assign(w, 0.0);
    state_.remaining_ratio = 1.0;
    state_.step = 0;
    remaining_ = cfg_.budget;
    done_ = false;
    return state_;
  }

  Transition step(std::span<const int> actions) {
    if (done_) throw ContractError("WorkerEnv::step: episode is done");
    if (static_cast<int>(actions.size()) != cfg_.worker_count)
      throw ContractError("WorkerEnv::step: action vector length mismatch");

    const int w = cfg_.worker_count;
    const auto t = static_cast<std::uint64_t>(state_.step);
    Transition tr;
    tr.actions.assign(actions.begin(), actions.end());
    tr.contributions.assign(w, 0.0);
    tr.rewards.assign(w, 0.0);

    double sum_d = 0.0;
    for (int i = 0; i < w; ++i) {
      if (actions[i] == 0) continue;
      double d = rng::normal(cfg_.contribution_mean, cfg_.contribution_std,
                             {cfg_.seed, static_cast<std::uint64_t>(rng::Stream::contribution), t,
                              static_cast<std::uint64_t>(i)});
      d = std::max(0.0, d);
      d = std::min(d, cfg_.capacity - state_.cumulative_data[i]);
      tr.contributions[i] = d;
      sum_d += d;
    }

    const double pre_ratio = remaining_ / cfg_.budget;
    tr.pool = sum_d > 0 ? cfg_.payout_rate * remaining_ : 0.0;
    const double base = cfg_.params.theta * (1.0 - pre_ratio);
    for (int i = 0; i < w; ++i) {
      if (actions[i] != 0) {
        const double share = sum_d > 0 ? (tr.contributions[i] / sum_d) * tr.pool : 0.0;
        tr.rewards[i] = share + base - state_.fatigue[i];
      } else {
        tr.rewards[i] = cfg_.params.phi;
      }
    }

    remaining_ -= tr.pool;
    bool all_capped = true;
    for (int i = 0; i < w; ++i) {
      if (tr.contributions[i] > 0) {
        // keep the cap exact so the all-at-capacity test is an equality
        if (tr.contributions[i] >= cfg_.capacity - state_.cumulative_data[i])
          state_.cumulative_data[i] = cfg_.capacity;
        else
          state_.cumulative_data[i] += tr.contributions[i];
      }
      state_.fatigue[i] = fatigue(state_.cumulative_data[i], cfg_.params);
      all_capped = all_capped && state_.cumulative_data[i] >= cfg_.capacity;
    }
    state_.remaining_ratio = remaining_ / cfg_.budget;
    state_.step += 1;

    done_ = remaining_ <= 0 || state_.step >= cfg_.max_steps || all_capped;
    tr.next_state = state_;
    tr.done = done_;
    return tr;
  }

 private:
  EnvConfig cfg_;
  EnvState state_;
  double remaining_ = 0.0;
  bool done_ = false;
};

struct EpisodeTotals {
  double total_data = 0.0;
  double total_paid = 0.0;
};

// Totals consumed by the budget search: data collected and budget actually
// disbursed. Base rewards, fatigue and penalties are utility adjustments,
// not transfers out of the LMO budget; the reward-sum alternative is kept
// behind the config flag for sensitivity runs.
inline EpisodeTotals episode_totals(std::span<const Transition> transitions,
                                    bool paid_is_reward_sum = false) {
  EpisodeTotals totals;
  for (const auto& tr : transitions) {
    for (double d : tr.contributions) totals.total_data += d;
    if (paid_is_reward_sum) {
      for (double r : tr.rewards) totals.total_paid += r;
    } else {
      totals.total_paid += tr.pool;
    }
  }
  return totals;
}

}  // namespace flgame

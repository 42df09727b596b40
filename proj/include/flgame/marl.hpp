#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "flgame/env.hpp"
#include "flgame/policy.hpp"

// Clipped-surrogate policy-gradient training on the worker environment.
// Rollout collection is synchronous by default and optionally parallel;
// because every random draw is counter-based, the parallelism level never
// changes the sample stream of a given episode index.

namespace flgame {

struct TrainConfig {
  int episodes_per_iter = 8;
  int iterations = 1000;
  double clip_ratio = 0.2;   // epsilon of the clipped objective
  double discount = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  int minibatch_size = 64;
  int rollout_parallelism = 1;
  std::uint64_t seed = 0;
  int update_epochs = 4;
  int hidden_units = 32;
  bool share_weights = false;  // one network for all agents instead of one each

  void validate() const {
    if (episodes_per_iter < 1) throw ConfigError("TrainConfig: episodes_per_iter must be >= 1");
    if (iterations < 0) throw ConfigError("TrainConfig: iterations must be >= 0");
    if (!(clip_ratio > 0) || clip_ratio >= 1)
      throw ConfigError("TrainConfig: clip_ratio must be in (0,1)");
    if (!(discount > 0) || discount > 1) throw ConfigError("TrainConfig: discount must be in (0,1]");
    if (!(gae_lambda >= 0) || gae_lambda > 1)
      throw ConfigError("TrainConfig: gae_lambda must be in [0,1]");
    if (!(learning_rate > 0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (minibatch_size < 1) throw ConfigError("TrainConfig: minibatch_size must be >= 1");
    if (rollout_parallelism < 1) throw ConfigError("TrainConfig: rollout_parallelism must be >= 1");
    if (update_epochs < 1) throw ConfigError("TrainConfig: update_epochs must be >= 1");
    if (hidden_units < 1) throw ConfigError("TrainConfig: hidden_units must be >= 1");
  }
};

// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A).
inline double clipped_surrogate(double ratio, double advantage, double clip_ratio) {
  if (!(ratio > 0)) throw DomainError("clipped_surrogate: ratio must be > 0");
  const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
  return std::min(ratio * advantage, clipped * advantage);
}

// Subgradient of the surrogate in the ratio; ties resolve to the unclipped
// branch, matching the loss computation.
inline double clipped_surrogate_dratio(double ratio, double advantage, double clip_ratio) {
  const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

// Frozen minibatch for the policy objective.
struct SurrogateBatch {
  std::vector<std::vector<double>> obs;
  std::vector<int> actions;
  std::vector<double> logp_old;
  std::vector<double> advantages;

  std::size_t size() const { return actions.size(); }
};

// Mean clipped surrogate of a network over a frozen batch (the objective
// being maximized).
inline double surrogate_loss(const Mlp& pi, const SurrogateBatch& batch, double clip_ratio) {
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double z = pi.forward(batch.obs[k]);
    const double logp = batch.actions[k] ? log_sigmoid(z) : log_sigmoid(-z);
    const double ratio = std::exp(logp - batch.logp_old[k]);
    total += clipped_surrogate(ratio, batch.advantages[k], clip_ratio);
  }
  return total / static_cast<double>(batch.size());
}

// Analytic gradient of surrogate_loss with respect to the network
// parameters. grad must be zero-initialized with pi.params.size() entries.
inline void surrogate_grad(const Mlp& pi, const SurrogateBatch& batch, double clip_ratio,
                           std::span<double> grad) {
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double z = pi.forward(batch.obs[k]);
    const double p = sigmoid(z);
    const double logp = batch.actions[k] ? log_sigmoid(z) : log_sigmoid(-z);
    const double ratio = std::exp(logp - batch.logp_old[k]);
    const double dsur_dratio = clipped_surrogate_dratio(ratio, batch.advantages[k], clip_ratio);
    const double dlogp_dz = batch.actions[k] ? 1.0 - p : -p;
    pi.accumulate_grad(batch.obs[k], inv_n * dsur_dratio * ratio * dlogp_dz, grad);
  }
}

struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m, v;
  long t = 0;

  explicit Adam(std::size_t n, double lr_) : lr(lr_), m(n, 0.0), v(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

enum class ActionMode { sample, greedy };

struct EpisodeRollout {
  std::vector<std::vector<double>> obs;     // observation before each step
  std::vector<std::vector<int>> actions;    // per step, per agent
  std::vector<std::vector<double>> logits;  // per step, per agent (Mlp rollouts only)
  std::vector<Transition> transitions;
};

namespace detail {

// Deterministic fan-out: fn(i) for i in [0, n), at most jobs in flight.
// Callers store results by index, so scheduling never affects output.
template <typename F>
void parallel_for(int n, int jobs, F&& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::future<void>> workers;
  workers.reserve(jobs);
  for (int j = 0; j < jobs; ++j)
    workers.push_back(std::async(std::launch::async, [&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    }));
  for (auto& w : workers) w.get();
}

inline int sample_action(double p, std::uint64_t action_seed, int step, int agent,
                         ActionMode mode) {
  if (mode == ActionMode::greedy) return p >= 0.5 ? 1 : 0;
  const double u = rng::uniform({action_seed, static_cast<std::uint64_t>(rng::Stream::action),
                                 static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(agent)});
  return u < p ? 1 : 0;
}

}  // namespace detail

// Run one full episode. cfg.seed drives the environment draws; action_seed
// drives the Bernoulli action sampling.
inline EpisodeRollout rollout_episode(const Policy& policy, const EnvConfig& cfg,
                                      std::uint64_t action_seed,
                                      ActionMode mode = ActionMode::sample) {
  const auto* mlp = dynamic_cast<const MlpPolicy*>(&policy);
  WorkerEnv env(cfg);
  EpisodeRollout ep;
  std::vector<int> actions(cfg.worker_count, 0);
  std::vector<double> logits(cfg.worker_count, 0.0);
  while (!env.done()) {
    auto obs = env.observation();
    for (int a = 0; a < cfg.worker_count; ++a) {
      double p;
      if (mlp != nullptr) {
        logits[a] = mlp->pi(a).forward(obs);
        p = sigmoid(logits[a]);
      } else {
        p = policy.participation_probability(a, obs);
      }
      actions[a] = detail::sample_action(p, action_seed, env.state().step, a, mode);
    }
    ep.obs.push_back(std::move(obs));
    ep.actions.push_back(actions);
    if (mlp != nullptr) ep.logits.push_back(logits);
    ep.transitions.push_back(env.step(actions));
  }
  return ep;
}

struct EvalResult {
  double mean_total_data = 0.0;
  double mean_total_paid = 0.0;
  std::vector<double> mean_returns;  // undiscounted per-agent episode return
  double mean_return = 0.0;          // averaged over agents as well
  int episodes = 0;
};

// Seeded evaluation of a policy: means over `episodes` independent episodes.
// Episode seeds derive from cfg.seed only, so two calls are identical.
inline EvalResult evaluate(const Policy& policy, const EnvConfig& cfg, int episodes,
                           ActionMode mode = ActionMode::sample, int parallelism = 1) {
  cfg.validate();
  if (episodes < 1) throw ContractError("evaluate: episodes must be >= 1");
  std::vector<EpisodeRollout> rollouts(episodes);
  detail::parallel_for(episodes, parallelism, [&](int e) {
    EnvConfig ep_cfg = cfg;
    ep_cfg.seed = rng::mix({cfg.seed, static_cast<std::uint64_t>(rng::Stream::eval_episode),
                            static_cast<std::uint64_t>(e)});
    const std::uint64_t action_seed =
        rng::mix({cfg.seed, static_cast<std::uint64_t>(rng::Stream::eval_episode),
                  static_cast<std::uint64_t>(e), 0x5eedULL});
    rollouts[e] = rollout_episode(policy, ep_cfg, action_seed, mode);
  });

  EvalResult res;
  res.episodes = episodes;
  res.mean_returns.assign(cfg.worker_count, 0.0);
  for (const auto& ep : rollouts) {
    const auto totals = episode_totals(ep.transitions, cfg.paid_is_reward_sum);
    res.mean_total_data += totals.total_data;
    res.mean_total_paid += totals.total_paid;
    for (const auto& tr : ep.transitions)
      for (int a = 0; a < cfg.worker_count; ++a) res.mean_returns[a] += tr.rewards[a];
  }
  const double inv = 1.0 / episodes;
  res.mean_total_data *= inv;
  res.mean_total_paid *= inv;
  for (auto& r : res.mean_returns) r *= inv;
  res.mean_return = std::accumulate(res.mean_returns.begin(), res.mean_returns.end(), 0.0) /
                    static_cast<double>(cfg.worker_count);
  return res;
}

struct TrainLogRow {
  int iteration = 0;
  double mean_return = 0.0;
  double min_return = 0.0;
  double max_return = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  MlpPolicy policy;
  std::vector<TrainLogRow> log;
};

namespace detail {

struct AgentBatch {
  SurrogateBatch surrogate;
  std::vector<double> returns;  // value targets, aligned with surrogate rows
};

inline void gae_fill(const MlpPolicy& policy, const EpisodeRollout& ep, int agent, double discount,
                     double gae_lambda, AgentBatch& out) {
  const int steps = static_cast<int>(ep.transitions.size());
  std::vector<double> values(steps);
  for (int t = 0; t < steps; ++t) values[t] = policy.value(agent, ep.obs[t]);
  double adv = 0.0;
  std::vector<double> advantages(steps);
  for (int t = steps - 1; t >= 0; --t) {
    const double next_value = t + 1 < steps ? values[t + 1] : 0.0;  // terminal bootstrap
    const double delta = ep.transitions[t].rewards[agent] + discount * next_value - values[t];
    adv = delta + discount * gae_lambda * (t + 1 < steps ? adv : 0.0);
    advantages[t] = adv;
  }
  for (int t = 0; t < steps; ++t) {
    out.surrogate.obs.push_back(ep.obs[t]);
    out.surrogate.actions.push_back(ep.actions[t][agent]);
    const double z = ep.logits[t][agent];
    out.surrogate.logp_old.push_back(ep.actions[t][agent] ? log_sigmoid(z) : log_sigmoid(-z));
    out.surrogate.advantages.push_back(advantages[t]);
    out.returns.push_back(advantages[t] + values[t]);
  }
}

inline void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-12) return;  // keeps an all-zero batch a no-op
  for (double& a : adv) a = (a - mean) / sd;
}

}  // namespace detail

// Clipped policy-gradient training loop: collect a batch of seeded episodes,
// estimate advantages with GAE against per-agent value baselines, then take
// minibatched Adam steps on the clipped objective.
inline TrainResult train(const EnvConfig& env_cfg, const TrainConfig& cfg) {
  env_cfg.validate();
  cfg.validate();
  const int agents = env_cfg.worker_count;
  const int obs_dim = agents + 1;
  const int nets = cfg.share_weights ? 1 : agents;

  TrainResult result;
  result.policy = MlpPolicy(agents, obs_dim, cfg.hidden_units, cfg.seed, cfg.share_weights);
  MlpPolicy& policy = result.policy;

  std::vector<Adam> pi_opt, vf_opt;
  for (int n = 0; n < nets; ++n) {
    pi_opt.emplace_back(policy.pi(n).params.size(), cfg.learning_rate);
    vf_opt.emplace_back(policy.vf(n).params.size(), cfg.learning_rate);
  }

  std::vector<EpisodeRollout> rollouts(cfg.episodes_per_iter);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    detail::parallel_for(cfg.episodes_per_iter, cfg.rollout_parallelism, [&](int e) {
      const std::uint64_t global_ep =
          static_cast<std::uint64_t>(iter) * cfg.episodes_per_iter + static_cast<std::uint64_t>(e);
      EnvConfig ep_cfg = env_cfg;
      ep_cfg.seed = rng::mix({cfg.seed, env_cfg.seed,
                              static_cast<std::uint64_t>(rng::Stream::episode), global_ep});
      const std::uint64_t action_seed = rng::mix(
          {cfg.seed, static_cast<std::uint64_t>(rng::Stream::episode), global_ep, 0xac710ULL});
      rollouts[e] = rollout_episode(policy, ep_cfg, action_seed, ActionMode::sample);
    });

    // per-iteration log
    TrainLogRow row;
    row.iteration = iter;
    double entropy_sum = 0.0;
    std::size_t entropy_n = 0;
    bool first = true;
    for (const auto& ep : rollouts) {
      double ep_return = 0.0;
      for (const auto& tr : ep.transitions)
        for (double r : tr.rewards) ep_return += r;
      ep_return /= agents;
      row.mean_return += ep_return;
      row.min_return = first ? ep_return : std::min(row.min_return, ep_return);
      row.max_return = first ? ep_return : std::max(row.max_return, ep_return);
      first = false;
      for (const auto& step_logits : ep.logits)
        for (double z : step_logits) {
          const double p = sigmoid(z);
          entropy_sum += -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
          ++entropy_n;
        }
    }
    row.mean_return /= cfg.episodes_per_iter;
    row.entropy = entropy_n ? entropy_sum / static_cast<double>(entropy_n) : 0.0;
    if (!std::isfinite(row.mean_return))
      throw TrainingError("train: non-finite mean return at iteration " + std::to_string(iter));
    result.log.push_back(row);

    // assemble per-network batches
    std::vector<detail::AgentBatch> batches(nets);
    for (const auto& ep : rollouts)
      for (int a = 0; a < agents; ++a)
        detail::gae_fill(policy, ep, a, cfg.discount, cfg.gae_lambda,
                         batches[cfg.share_weights ? 0 : a]);
    for (auto& b : batches) detail::normalize_advantages(b.surrogate.advantages);

    for (int n = 0; n < nets; ++n) {
      auto& batch = batches[n];
      const std::size_t total = batch.surrogate.size();
      if (total == 0) continue;
      std::vector<std::size_t> order(total);
      std::iota(order.begin(), order.end(), 0);
      for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
        // deterministic Fisher-Yates driven by counter randomness
        for (std::size_t i = total - 1; i > 0; --i) {
          const std::uint64_t u = rng::mix({cfg.seed,
                                            static_cast<std::uint64_t>(rng::Stream::shuffle),
                                            static_cast<std::uint64_t>(iter),
                                            static_cast<std::uint64_t>(epoch),
                                            static_cast<std::uint64_t>(n),
                                            static_cast<std::uint64_t>(i)});
          std::swap(order[i], order[u % (i + 1)]);
        }
        for (std::size_t start = 0; start < total; start += cfg.minibatch_size) {
          const std::size_t stop = std::min(total, start + cfg.minibatch_size);
          SurrogateBatch mb;
          std::vector<double> mb_returns;
          for (std::size_t k = start; k < stop; ++k) {
            const std::size_t idx = order[k];
            mb.obs.push_back(batch.surrogate.obs[idx]);
            mb.actions.push_back(batch.surrogate.actions[idx]);
            mb.logp_old.push_back(batch.surrogate.logp_old[idx]);
            mb.advantages.push_back(batch.surrogate.advantages[idx]);
            mb_returns.push_back(batch.returns[idx]);
          }
          // maximize the surrogate: Adam descends on its negation
          std::vector<double> grad(policy.pi(n).params.size(), 0.0);
          surrogate_grad(policy.pi(n), mb, cfg.clip_ratio, grad);
          for (double& g : grad) g = -g;
          pi_opt[n].step(policy.pi(n).params, grad);

          std::vector<double> vgrad(policy.vf(n).params.size(), 0.0);
          const double inv_n = 1.0 / static_cast<double>(mb.size());
          for (std::size_t k = 0; k < mb.size(); ++k) {
            const double v = policy.vf(n).forward(mb.obs[k]);
            policy.vf(n).accumulate_grad(mb.obs[k], inv_n * (v - mb_returns[k]), vgrad);
          }
          vf_opt[n].step(policy.vf(n).params, vgrad);
        }
      }
    }
    policy.set_version(iter + 1);
  }
  return result;
}

struct OracleResult {
  double best_total_return = 0.0;              // discounted, summed over agents
  std::vector<double> per_agent_returns;       // of the maximizing sequence
  std::vector<std::vector<int>> best_actions;  // step-major joint actions
};

// Exhaustive search over all joint action sequences of a tiny deterministic
// instance. Ground truth for training tests; refuses anything not tiny.
inline OracleResult brute_force_oracle(const EnvConfig& cfg, double discount) {
  cfg.validate();
  if (cfg.worker_count > 3 || cfg.max_steps > 4 || cfg.contribution_std != 0.0)
    throw ContractError(
        "brute_force_oracle: instance too large (need <= 3 workers, <= 4 steps, std = 0)");
  const int w = cfg.worker_count;
  const int t_max = cfg.max_steps;
  const std::uint64_t joint = 1ULL << w;
  std::uint64_t sequences = 1;
  for (int t = 0; t < t_max; ++t) sequences *= joint;

  OracleResult best;
  bool have_best = false;
  std::vector<int> actions(w, 0);
  for (std::uint64_t code = 0; code < sequences; ++code) {
    WorkerEnv env(cfg);
    std::vector<double> returns(w, 0.0);
    std::uint64_t rest = code;
    double gamma_t = 1.0;
    for (int t = 0; t < t_max && !env.done(); ++t) {
      const std::uint64_t digit = rest % joint;
      rest /= joint;
      for (int i = 0; i < w; ++i) actions[i] = static_cast<int>((digit >> i) & 1ULL);
      const auto tr = env.step(actions);
      for (int i = 0; i < w; ++i) returns[i] += gamma_t * tr.rewards[i];
      gamma_t *= discount;
    }
    const double total = std::accumulate(returns.begin(), returns.end(), 0.0);
    if (!have_best || total > best.best_total_return) {
      have_best = true;
      best.best_total_return = total;
      best.per_agent_returns = returns;
      best.best_actions.clear();
      std::uint64_t r2 = code;
      for (int t = 0; t < t_max; ++t) {
        const std::uint64_t digit = r2 % joint;
        r2 /= joint;
        std::vector<int> step_actions(w);
        for (int i = 0; i < w; ++i) step_actions[i] = static_cast<int>((digit >> i) & 1ULL);
        best.best_actions.push_back(std::move(step_actions));
      }
    }
  }
  return best;
}

}  // namespace flgame

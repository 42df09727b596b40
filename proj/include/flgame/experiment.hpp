#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "flgame/config.hpp"
#include "flgame/csv.hpp"

// The experiment commands behind the CLI subcommands. Each one is an
// ordinary function so tests can drive it without spawning a process; the
// binary in tools/ only parses arguments and maps exceptions to exit codes.

namespace flgame {

struct RunOptions {
  std::string out_dir;
  int jobs = 1;
};

namespace expdetail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, 16);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> file_header(const ExperimentConfig& cfg) {
  return {"scenario=" + cfg.scenario + " config_hash=" + hex64(cfg.config_hash) +
          " master_seed=" + format_u64(cfg.master_seed)};
}

inline std::string out_path(const RunOptions& opts, const std::string& name) {
  return (std::filesystem::path(opts.out_dir) / name).string();
}

inline void ensure_out_dir(const RunOptions& opts) {
  std::filesystem::create_directories(opts.out_dir);
}

inline std::string policy_file(const std::string& dir, int lmo_id) {
  return (std::filesystem::path(dir) / ("policy_lmo" + std::to_string(lmo_id) + ".txt")).string();
}

struct WorkerLayerBundle {
  std::unique_ptr<WorkerLayer> layer;
  std::vector<std::shared_ptr<const Policy>> policies;  // kept alive for the sim layer
};

inline WorkerLayerBundle make_worker_layer(const ExperimentConfig& cfg,
                                           const std::vector<LmoProfile>& profiles) {
  WorkerLayerBundle bundle;
  EnvConfig env_template = cfg.env_template;
  env_template.seed = cfg.master_seed;

  if (cfg.worker_layer.type == "linear") {
    std::vector<double> coeffs = cfg.worker_layer.coefficients;
    if (coeffs.empty()) coeffs.assign(profiles.size(), 1.0);
    if (coeffs.size() == 1) coeffs.assign(profiles.size(), coeffs[0]);
    if (coeffs.size() < profiles.size())
      throw ConfigError("worker_layer.coefficients: need one coefficient per LMO");
    coeffs.resize(profiles.size());
    bundle.layer = std::make_unique<LinearWorkerLayer>(std::move(coeffs), cfg.obsa);
    return bundle;
  }

  for (const auto& profile : profiles) {
    if (cfg.worker_layer.type == "stub") {
      bundle.policies.push_back(
          std::make_shared<ConstantPolicy>(profile.worker_count, cfg.worker_layer.stub_probability));
      continue;
    }
    const std::string path = policy_file(cfg.policy_dir, profile.id);
    if (!std::filesystem::exists(path))
      throw ConfigError("missing policy file " + path + "; run the train subcommand first");
    auto policy = std::make_shared<MlpPolicy>(MlpPolicy::load(path));
    if (policy->agent_count() != profile.worker_count)
      throw ConfigError("policy " + path + " was trained for " +
                        std::to_string(policy->agent_count()) + " workers, profile expects " +
                        std::to_string(profile.worker_count));
    bundle.policies.push_back(std::move(policy));
  }
  auto sim = std::make_unique<SimWorkerLayer>(bundle.policies, env_template, cfg.obsa);
  if (cfg.asosa.retrain_each_iteration) {
    TrainConfig tc = cfg.train;
    tc.seed = rng::mix({cfg.master_seed, 0x7e7ea11ULL});
    sim->enable_retraining(tc);
  }
  bundle.layer = std::move(sim);
  return bundle;
}

inline AsosaOptions asosa_options(const ExperimentConfig& cfg) {
  AsosaOptions opts;
  opts.max_iterations = cfg.asosa.max_iterations;
  opts.relative_tolerance = cfg.asosa.relative_tolerance;
  opts.absolute_tolerance = cfg.asosa.absolute_tolerance;
  opts.obsa = cfg.obsa;
  return opts;
}

inline void write_asosa_trace(const std::string& path, const ExperimentConfig& cfg,
                              const std::vector<AsosaLmoRecord>& rows) {
  CsvWriter csv(path, file_header(cfg),
                "iteration,lmo,price,zeta_theory,budget_theory,budget_actual,total_paid,"
                "total_data,lmo_utility,tau,tp_utility,status");
  for (const auto& r : rows)
    csv.row({std::to_string(r.iteration), std::to_string(r.lmo), format_double(r.price),
             format_double(r.zeta_theory), format_double(r.budget_theory),
             format_double(r.budget_actual), format_double(r.total_paid),
             format_double(r.total_data), format_double(r.lmo_utility), format_double(r.tau),
             format_double(r.tp_utility), r.status});
}

inline void write_episode_trace(const std::string& path, const ExperimentConfig& cfg,
                                const std::vector<EpisodeRollout>& episodes) {
  CsvWriter csv(path, file_header(cfg),
                "episode,step,worker,action,contribution,reward,remaining_ratio,fatigue");
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& ep = episodes[e];
    for (std::size_t t = 0; t < ep.transitions.size(); ++t) {
      const auto& tr = ep.transitions[t];
      for (std::size_t w = 0; w < tr.actions.size(); ++w)
        csv.row({std::to_string(e), std::to_string(t), std::to_string(w),
                 std::to_string(tr.actions[w]), format_double(tr.contributions[w]),
                 format_double(tr.rewards[w]), format_double(tr.next_state.remaining_ratio),
                 format_double(tr.next_state.fatigue[w])});
    }
  }
}

}  // namespace expdetail

// Closed-form equilibrium report plus optional tau and price sweeps.
inline int cmd_equilibrium(const ExperimentConfig& cfg, const RunOptions& opts) {
  using namespace expdetail;
  ensure_out_dir(opts);
  const auto sol = solve_equilibrium(cfg.lmos, cfg.params);

  FirstOrderReport report;
  if (!sol.terminated) report = verify_first_order(sol, cfg.lmos, cfg.params);
  {
    CsvWriter csv(out_path(opts, "equilibrium_summary.csv"), file_header(cfg),
                  "tau_star,z_star,tp_utility,terminated,max_lmo_deviation,tp_deviation");
    csv.row({format_double(sol.tau_star), format_double(sol.z_star),
             format_double(sol.tp_utility), sol.terminated ? "1" : "0",
             format_double(report.max_lmo_deviation), format_double(report.tp_deviation)});
  }
  {
    CsvWriter csv(out_path(opts, "equilibrium_lmos.csv"), file_header(cfg),
                  "lmo,price,zeta_star,budget,predicted_utility,feasible");
    for (std::size_t m = 0; m < sol.per_lmo.size(); ++m) {
      const auto& e = sol.per_lmo[m];
      csv.row({std::to_string(e.id), format_double(cfg.lmos[m].price),
               format_double(e.zeta_star), format_double(e.budget),
               format_double(e.predicted_utility), e.feasible ? "1" : "0"});
    }
  }

  if (cfg.tau_sweep.present) {
    std::vector<double> prices;
    for (const auto& lmo : cfg.lmos) prices.push_back(lmo.price);
    const int n = cfg.tau_sweep.steps;
    std::vector<std::pair<double, double>> grid(n);  // (z, utility)
    std::vector<double> taus(n);
    detail::parallel_for(n, opts.jobs, [&](int i) {
      const double tau = cfg.tau_sweep.min +
                         (cfg.tau_sweep.max - cfg.tau_sweep.min) * i / static_cast<double>(n - 1);
      taus[i] = tau;
      const double z = optimal_total_data(tau, prices);
      grid[i] = {z, tp_utility(tau, z, cfg.params)};
    });
    CsvWriter csv(out_path(opts, "tau_sweep.csv"), file_header(cfg), "tau,z,tp_utility");
    for (int i = 0; i < n; ++i)
      csv.row({format_double(taus[i]), format_double(grid[i].first),
               format_double(grid[i].second)});
  }

  if (cfg.price_sweep.present) {
    const int n = cfg.price_sweep.steps;
    struct Row {
      double price, zeta, utility, tau, tp;
      bool terminated;
    };
    std::vector<Row> rows(n);
    detail::parallel_for(n, opts.jobs, [&](int i) {
      const double price =
          cfg.price_sweep.min +
          (cfg.price_sweep.max - cfg.price_sweep.min) * i / static_cast<double>(n - 1);
      auto profiles = cfg.lmos;
      std::size_t target = 0;
      for (std::size_t m = 0; m < profiles.size(); ++m)
        if (profiles[m].id == cfg.price_sweep.lmo_id) target = m;
      profiles[target].price = price;
      const auto s = solve_equilibrium(profiles, cfg.params);
      Row row{price, 0.0, 0.0, s.tau_star, s.tp_utility, s.terminated};
      if (!s.terminated) {
        row.zeta = s.per_lmo[target].zeta_star;
        row.utility = s.per_lmo[target].predicted_utility;
      }
      rows[i] = row;
    });
    CsvWriter csv(out_path(opts, "price_sweep.csv"), file_header(cfg),
                  "price,zeta,lmo_utility,tau,tp_utility,terminated");
    for (const auto& r : rows)
      csv.row({format_double(r.price), format_double(r.zeta), format_double(r.utility),
               format_double(r.tau), format_double(r.tp), r.terminated ? "1" : "0"});
  }
  return 0;
}

// Train one policy per LMO at its theoretical equilibrium budget; persist
// policies, training curves and a short evaluation trace.
inline int cmd_train(const ExperimentConfig& cfg, const RunOptions& opts) {
  using namespace expdetail;
  ensure_out_dir(opts);
  const auto sol = solve_equilibrium(cfg.lmos, cfg.params);
  if (sol.terminated)
    throw ConfigError("train: optimal tau is non-positive, no budgets to train against");

  const int n = static_cast<int>(cfg.lmos.size());
  detail::parallel_for(n, opts.jobs, [&](int m) {
    const auto& profile = cfg.lmos[m];
    EnvConfig env = cfg.env_template;
    env.worker_count = profile.worker_count;
    const double budget = sol.per_lmo[m].budget;
    env.budget = budget > 0 ? budget : sol.tau_star / static_cast<double>(n);
    env.seed = rng::mix({cfg.master_seed, static_cast<std::uint64_t>(rng::Stream::scenario),
                         static_cast<std::uint64_t>(m)});

    TrainConfig tc = cfg.train;
    tc.seed = rng::mix({cfg.master_seed, 0x7a11ULL, static_cast<std::uint64_t>(profile.id)});
    auto result = train(env, tc);
    result.policy.save(policy_file(opts.out_dir, profile.id), file_header(cfg));

    CsvWriter log(out_path(opts, "training_log_lmo" + std::to_string(profile.id) + ".csv"),
                  file_header(cfg), "iteration,mean_return,min_return,max_return,entropy");
    for (const auto& row : result.log)
      log.row({std::to_string(row.iteration), format_double(row.mean_return),
               format_double(row.min_return), format_double(row.max_return),
               format_double(row.entropy)});

    if (cfg.train_trace_episodes > 0) {
      std::vector<EpisodeRollout> episodes;
      for (int e = 0; e < cfg.train_trace_episodes; ++e) {
        EnvConfig ep_cfg = env;
        ep_cfg.seed = rng::mix({env.seed, static_cast<std::uint64_t>(rng::Stream::eval_episode),
                                static_cast<std::uint64_t>(e)});
        episodes.push_back(rollout_episode(result.policy, ep_cfg,
                                           rng::mix({env.seed, 0x7aceULL,
                                                     static_cast<std::uint64_t>(e)}),
                                           ActionMode::sample));
      }
      write_episode_trace(out_path(opts, "episodes_lmo" + std::to_string(profile.id) + ".csv"),
                          cfg, episodes);
    }
  });
  return 0;
}

// One budget search per feasible LMO at the current equilibrium.
inline int cmd_obsa(const ExperimentConfig& cfg, const RunOptions& opts) {
  using namespace expdetail;
  ensure_out_dir(opts);
  const auto sol = solve_equilibrium(cfg.lmos, cfg.params);
  CsvWriter summary(out_path(opts, "obsa_summary.csv"), file_header(cfg),
                    "lmo,zeta_target,budget_theory,budget_star,total_paid,total_data,iterations,"
                    "converged,diagnostic,monotonicity_warning");
  if (sol.terminated) return 0;  // valid outcome: nothing to search

  auto bundle = make_worker_layer(cfg, cfg.lmos);
  for (std::size_t m = 0; m < cfg.lmos.size(); ++m) {
    const auto& profile = cfg.lmos[m];
    const double zeta = sol.per_lmo[m].zeta_star;
    if (!(zeta > 0)) {
      summary.row({std::to_string(profile.id), format_double(zeta),
                   format_double(sol.per_lmo[m].budget), "0", "0", "0", "0", "0",
                   "zeta non-positive; excluded", "0"});
      continue;
    }
    const auto res = bundle.layer->run_obsa(1, static_cast<int>(m), profile, sol.tau_star, zeta,
                                            sol.per_lmo[m].budget, cfg.params);
    CsvWriter trace(out_path(opts, "obsa_lmo" + std::to_string(profile.id) + ".csv"),
                    file_header(cfg), "bisection_iter,b_mid,total_data,total_paid");
    for (const auto& it : res.trace)
      trace.row({std::to_string(it.iter), format_double(it.b_mid), format_double(it.total_data),
                 format_double(it.total_paid)});
    summary.row({std::to_string(profile.id), format_double(zeta),
                 format_double(sol.per_lmo[m].budget), format_double(res.budget_star),
                 format_double(res.total_paid), format_double(res.total_data),
                 std::to_string(res.iterations), res.converged ? "1" : "0",
                 to_string(res.diagnostic), res.monotonicity_warning ? "1" : "0"});
  }
  return 0;
}

// Full adaptive loop (or a single-pass pricing baseline, per config scheme).
inline int cmd_asosa(const ExperimentConfig& cfg, const RunOptions& opts) {
  using namespace expdetail;
  ensure_out_dir(opts);
  if (cfg.scheme == "equilibrium-only")
    throw ConfigError("scheme equilibrium-only: use the equilibrium subcommand");

  auto bundle = make_worker_layer(cfg, cfg.lmos);
  if (cfg.scheme == "asosa") {
    const auto trace = asosa(cfg.lmos, *bundle.layer, cfg.params, asosa_options(cfg));
    write_asosa_trace(out_path(opts, "asosa_trace.csv"), cfg, trace.rows);
    CsvWriter summary(out_path(opts, "asosa_summary.csv"), file_header(cfg),
                      "termination,iterations,final_tau,final_tp_utility,final_total_data,"
                      "active_count,diagnostic");
    summary.row({to_string(trace.termination), std::to_string(trace.iterations),
                 format_double(trace.final_tau), format_double(trace.final_tp_utility),
                 format_double(trace.final_total_data),
                 std::to_string(trace.final_active_ids.size()), trace.diagnostic});
    return 0;
  }

  SchemeOutcome outcome;
  if (cfg.scheme == "fixed") {
    outcome = run_fixed_pricing(cfg.lmos, cfg.compare.fixed_price, cfg.params, *bundle.layer);
  } else {
    outcome = run_random_pricing(cfg.lmos, cfg.compare.random_hi,
                                 rng::mix({cfg.master_seed,
                                           static_cast<std::uint64_t>(rng::Stream::price)}),
                                 cfg.params, *bundle.layer);
  }
  write_asosa_trace(out_path(opts, "asosa_trace.csv"), cfg, outcome.rows);
  CsvWriter comparison(out_path(opts, "comparison.csv"), file_header(cfg),
                       "scheme,M,tau,tp_utility,total_data");
  comparison.row({outcome.scheme, std::to_string(outcome.m_count), format_double(outcome.tau),
                  format_double(outcome.tp_utility), format_double(outcome.total_data)});
  return 0;
}

// Adaptive loop versus fixed and random pricing on matched seeds, across a
// sweep of LMO counts.
inline int cmd_compare(const ExperimentConfig& cfg, const RunOptions& opts) {
  using namespace expdetail;
  ensure_out_dir(opts);
  if (!cfg.compare.present) throw ConfigError("compare: config lacks a compare block");

  struct Entry {
    double tau = 0, tp = 0, data = 0;
  };
  const int n = static_cast<int>(cfg.compare.m_values.size());
  std::vector<std::array<Entry, 3>> results(n);  // asosa, fixed, random-mean
  detail::parallel_for(n, opts.jobs, [&](int i) {
    const int m_count = cfg.compare.m_values[i];
    const std::vector<LmoProfile> profiles(cfg.lmos.begin(), cfg.lmos.begin() + m_count);
    auto bundle = make_worker_layer(cfg, profiles);

    const auto trace = asosa(profiles, *bundle.layer, cfg.params, asosa_options(cfg));
    results[i][0] = {trace.final_tau, trace.final_tp_utility, trace.final_total_data};

    const auto fixed =
        run_fixed_pricing(profiles, cfg.compare.fixed_price, cfg.params, *bundle.layer);
    results[i][1] = {fixed.tau, fixed.terminated ? 0.0 : fixed.tp_utility, fixed.total_data};

    Entry rnd;
    for (int k = 0; k < cfg.compare.random_draws; ++k) {
      const auto draw = run_random_pricing(
          profiles, cfg.compare.random_hi,
          rng::mix({cfg.master_seed, static_cast<std::uint64_t>(rng::Stream::price),
                    static_cast<std::uint64_t>(m_count), static_cast<std::uint64_t>(k)}),
          cfg.params, *bundle.layer);
      rnd.tau += draw.tau;
      rnd.tp += draw.terminated ? 0.0 : draw.tp_utility;
      rnd.data += draw.total_data;
    }
    const double inv = 1.0 / cfg.compare.random_draws;
    results[i][2] = {rnd.tau * inv, rnd.tp * inv, rnd.data * inv};
  });

  CsvWriter csv(out_path(opts, "comparison.csv"), file_header(cfg),
                "scheme,M,tau,tp_utility,total_data");
  const char* names[3] = {"asosa", "fixed", "random"};
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < 3; ++s)
      csv.row({names[s], std::to_string(cfg.compare.m_values[i]),
               format_double(results[i][s].tau), format_double(results[i][s].tp),
               format_double(results[i][s].data)});
  return 0;
}

}  // namespace flgame

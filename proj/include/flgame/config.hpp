#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flgame/asosa.hpp"
#include "flgame/env.hpp"
#include "flgame/marl.hpp"

// Experiment configuration: one JSON document describing the scenario.
// Parsing is strict: unknown keys anywhere are errors, so typos fail fast
// instead of silently running with defaults.

namespace flgame {

struct TauSweepSpec {
  bool present = false;
  double min = 0.0;
  double max = 0.0;
  int steps = 0;
};

struct PriceSweepSpec {
  bool present = false;
  int lmo_id = 0;
  double min = 0.0;
  double max = 0.0;
  int steps = 0;
};

struct CompareSpec {
  bool present = false;
  std::vector<int> m_values;
  double fixed_price = 10.0;
  double random_hi = 10.0;
  int random_draws = 20;
};

struct WorkerLayerSpec {
  std::string type = "sim";  // sim | stub | linear
  double stub_probability = 1.0;
  std::vector<double> coefficients;  // linear layer; broadcast when size 1
};

struct AsosaSpec {
  int max_iterations = 50;
  double relative_tolerance = 1e-3;
  bool absolute_tolerance = false;
  bool retrain_each_iteration = false;
};

struct ExperimentConfig {
  std::string scenario = "scenario";
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  std::string policy_dir;  // defaults to output_dir
  std::string scheme = "asosa";  // asosa | fixed | random | equilibrium-only
  SystemParams params;
  std::vector<LmoProfile> lmos;
  EnvConfig env_template;  // budget/worker_count/seed filled per run
  TrainConfig train;
  int train_trace_episodes = 4;
  ObsaOptions obsa;
  AsosaSpec asosa;
  WorkerLayerSpec worker_layer;
  TauSweepSpec tau_sweep;
  PriceSweepSpec price_sweep;
  CompareSpec compare;
  std::uint64_t config_hash = 0;

  static ExperimentConfig load_file(const std::string& path,
                                    std::optional<std::uint64_t> seed_override = {});
  static ExperimentConfig from_json(const nlohmann::json& doc,
                                    std::optional<std::uint64_t> seed_override = {});
};

namespace cfgdetail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("config: " + ctx + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + item.key() + "' in " + ctx);
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cfgdetail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc,
                                                    std::optional<std::uint64_t> seed_override) {
  using cfgdetail::check_keys;
  using cfgdetail::get_or;
  ExperimentConfig cfg;
  check_keys(doc,
             {"scenario", "master_seed", "output_dir", "policy_dir", "scheme", "params", "lmos",
              "env", "train", "obsa", "asosa", "worker_layer", "sweeps", "compare"},
             "document root");

  cfg.scenario = get_or<std::string>(doc, "scenario", "scenario");
  cfg.master_seed = seed_override.value_or(get_or<std::uint64_t>(doc, "master_seed", 0));
  cfg.output_dir = get_or<std::string>(doc, "output_dir", "out");
  cfg.policy_dir = get_or<std::string>(doc, "policy_dir", "");
  cfg.scheme = get_or<std::string>(doc, "scheme", "asosa");
  if (cfg.scheme != "asosa" && cfg.scheme != "fixed" && cfg.scheme != "random" &&
      cfg.scheme != "equilibrium-only")
    throw ConfigError("config: scheme must be asosa | fixed | random | equilibrium-only");

  if (doc.contains("params")) {
    const auto& p = doc.at("params");
    check_keys(p,
               {"lambda", "alpha", "beta", "theta", "phi", "fatigue_epsilon", "fatigue_gamma",
                "fatigue_delta", "obsa_tolerance", "conv_tolerance"},
               "params");
    cfg.params.lambda = get_or(p, "lambda", cfg.params.lambda);
    cfg.params.alpha = get_or(p, "alpha", cfg.params.alpha);
    cfg.params.beta = get_or(p, "beta", cfg.params.beta);
    cfg.params.theta = get_or(p, "theta", cfg.params.theta);
    cfg.params.phi = get_or(p, "phi", cfg.params.phi);
    cfg.params.fatigue_epsilon = get_or(p, "fatigue_epsilon", cfg.params.fatigue_epsilon);
    cfg.params.fatigue_gamma = get_or(p, "fatigue_gamma", cfg.params.fatigue_gamma);
    cfg.params.fatigue_delta = get_or(p, "fatigue_delta", cfg.params.fatigue_delta);
    cfg.params.obsa_tolerance = get_or(p, "obsa_tolerance", cfg.params.obsa_tolerance);
    cfg.params.conv_tolerance = get_or(p, "conv_tolerance", cfg.params.conv_tolerance);
  }
  cfg.params.validate();

  if (!doc.contains("lmos") || !doc.at("lmos").is_array() || doc.at("lmos").empty())
    throw ConfigError("config: lmos must be a non-empty array");
  int auto_id = 1;
  for (const auto& j : doc.at("lmos")) {
    check_keys(j, {"id", "price", "fixed_cost", "worker_count"}, "lmos[]");
    LmoProfile lmo;
    lmo.id = get_or(j, "id", auto_id);
    lmo.price = get_or(j, "price", 1.0);
    lmo.fixed_cost = get_or(j, "fixed_cost", 0.0);
    if (j.contains("worker_count")) {
      lmo.worker_count = j.at("worker_count").get<int>();
    } else {
      // worker pool size drawn from {5..20} under the master seed
      const double u = rng::uniform({cfg.master_seed,
                                     static_cast<std::uint64_t>(rng::Stream::scenario),
                                     static_cast<std::uint64_t>(auto_id), 0x77ULL});
      lmo.worker_count = 5 + static_cast<int>(u * 16.0);
      if (lmo.worker_count > 20) lmo.worker_count = 20;
    }
    lmo.validate();
    for (const auto& prev : cfg.lmos)
      if (prev.id == lmo.id) throw ConfigError("config: duplicate lmo id");
    cfg.lmos.push_back(lmo);
    ++auto_id;
  }

  {
    bool mean_given = false, std_given = false;
    if (doc.contains("env")) {
      const auto& e = doc.at("env");
      check_keys(e,
                 {"payout_rate", "contribution_mean", "contribution_std", "capacity", "max_steps",
                  "paid_is_reward_sum"},
                 "env");
      cfg.env_template.payout_rate = get_or(e, "payout_rate", cfg.env_template.payout_rate);
      cfg.env_template.capacity = get_or(e, "capacity", cfg.env_template.capacity);
      cfg.env_template.max_steps = get_or(e, "max_steps", cfg.env_template.max_steps);
      cfg.env_template.paid_is_reward_sum =
          get_or(e, "paid_is_reward_sum", cfg.env_template.paid_is_reward_sum);
      mean_given = e.contains("contribution_mean");
      std_given = e.contains("contribution_std");
      if (mean_given) cfg.env_template.contribution_mean = e.at("contribution_mean").get<double>();
      if (std_given) cfg.env_template.contribution_std = e.at("contribution_std").get<double>();
    }
    // derived defaults: half the capacity spread over the horizon, 25% spread
    if (!mean_given)
      cfg.env_template.contribution_mean =
          0.5 * cfg.env_template.capacity / cfg.env_template.max_steps;
    if (!std_given) cfg.env_template.contribution_std = 0.25 * cfg.env_template.contribution_mean;
  }
  cfg.env_template.params = cfg.params;
  cfg.env_template.seed = cfg.master_seed;
  cfg.env_template.validate();

  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    check_keys(t,
               {"episodes_per_iter", "iterations", "clip_ratio", "discount", "gae_lambda",
                "learning_rate", "minibatch_size", "rollout_parallelism", "update_epochs",
                "hidden_units", "share_weights", "trace_episodes"},
               "train");
    cfg.train.episodes_per_iter = get_or(t, "episodes_per_iter", cfg.train.episodes_per_iter);
    cfg.train.iterations = get_or(t, "iterations", cfg.train.iterations);
    cfg.train.clip_ratio = get_or(t, "clip_ratio", cfg.train.clip_ratio);
    cfg.train.discount = get_or(t, "discount", cfg.train.discount);
    cfg.train.gae_lambda = get_or(t, "gae_lambda", cfg.train.gae_lambda);
    cfg.train.learning_rate = get_or(t, "learning_rate", cfg.train.learning_rate);
    cfg.train.minibatch_size = get_or(t, "minibatch_size", cfg.train.minibatch_size);
    cfg.train.rollout_parallelism = get_or(t, "rollout_parallelism", cfg.train.rollout_parallelism);
    cfg.train.update_epochs = get_or(t, "update_epochs", cfg.train.update_epochs);
    cfg.train.hidden_units = get_or(t, "hidden_units", cfg.train.hidden_units);
    cfg.train.share_weights = get_or(t, "share_weights", cfg.train.share_weights);
    cfg.train_trace_episodes = get_or(t, "trace_episodes", cfg.train_trace_episodes);
  }
  cfg.train.validate();
  if (cfg.train_trace_episodes < 0)
    throw ConfigError("config: train.trace_episodes must be >= 0");

  if (doc.contains("obsa")) {
    const auto& o = doc.at("obsa");
    check_keys(o,
               {"eval_episodes", "max_bisections", "relative_tolerance", "absolute_tolerance",
                "monotonicity_check", "eval_parallelism"},
               "obsa");
    cfg.obsa.eval_episodes = get_or(o, "eval_episodes", cfg.obsa.eval_episodes);
    cfg.obsa.max_bisections = get_or(o, "max_bisections", cfg.obsa.max_bisections);
    cfg.obsa.relative_tolerance = get_or(o, "relative_tolerance", cfg.obsa.relative_tolerance);
    cfg.obsa.absolute_tolerance = get_or(o, "absolute_tolerance", cfg.obsa.absolute_tolerance);
    cfg.obsa.monotonicity_check = get_or(o, "monotonicity_check", cfg.obsa.monotonicity_check);
    cfg.obsa.eval_parallelism = get_or(o, "eval_parallelism", cfg.obsa.eval_parallelism);
    if (cfg.obsa.eval_episodes < 1) throw ConfigError("config: obsa.eval_episodes must be >= 1");
    if (cfg.obsa.max_bisections < 1) throw ConfigError("config: obsa.max_bisections must be >= 1");
    if (!(cfg.obsa.relative_tolerance > 0))
      throw ConfigError("config: obsa.relative_tolerance must be > 0");
  }

  if (doc.contains("asosa")) {
    const auto& a = doc.at("asosa");
    check_keys(a,
               {"max_iterations", "relative_tolerance", "absolute_tolerance",
                "retrain_each_iteration"},
               "asosa");
    cfg.asosa.max_iterations = get_or(a, "max_iterations", cfg.asosa.max_iterations);
    cfg.asosa.relative_tolerance = get_or(a, "relative_tolerance", cfg.asosa.relative_tolerance);
    cfg.asosa.absolute_tolerance = get_or(a, "absolute_tolerance", cfg.asosa.absolute_tolerance);
    cfg.asosa.retrain_each_iteration =
        get_or(a, "retrain_each_iteration", cfg.asosa.retrain_each_iteration);
    if (cfg.asosa.max_iterations < 1) throw ConfigError("config: asosa.max_iterations must be >= 1");
    if (!(cfg.asosa.relative_tolerance > 0))
      throw ConfigError("config: asosa.relative_tolerance must be > 0");
  }

  if (doc.contains("worker_layer")) {
    const auto& w = doc.at("worker_layer");
    check_keys(w, {"type", "stub_probability", "coefficients"}, "worker_layer");
    cfg.worker_layer.type = get_or<std::string>(w, "type", "sim");
    cfg.worker_layer.stub_probability = get_or(w, "stub_probability", 1.0);
    if (w.contains("coefficients"))
      cfg.worker_layer.coefficients = w.at("coefficients").get<std::vector<double>>();
    if (cfg.worker_layer.type != "sim" && cfg.worker_layer.type != "stub" &&
        cfg.worker_layer.type != "linear")
      throw ConfigError("config: worker_layer.type must be sim | stub | linear");
    if (!(cfg.worker_layer.stub_probability >= 0) || cfg.worker_layer.stub_probability > 1)
      throw ConfigError("config: worker_layer.stub_probability must be in [0,1]");
  }

  if (doc.contains("sweeps")) {
    const auto& s = doc.at("sweeps");
    check_keys(s, {"tau", "price"}, "sweeps");
    if (s.contains("tau")) {
      const auto& t = s.at("tau");
      check_keys(t, {"min", "max", "steps"}, "sweeps.tau");
      cfg.tau_sweep.present = true;
      cfg.tau_sweep.min = t.at("min").get<double>();
      cfg.tau_sweep.max = t.at("max").get<double>();
      cfg.tau_sweep.steps = t.at("steps").get<int>();
      if (!(cfg.tau_sweep.min > 0) || !(cfg.tau_sweep.max > cfg.tau_sweep.min) ||
          cfg.tau_sweep.steps < 2)
        throw ConfigError("config: sweeps.tau needs 0 < min < max and steps >= 2");
    }
    if (s.contains("price")) {
      const auto& pr = s.at("price");
      check_keys(pr, {"lmo", "min", "max", "steps"}, "sweeps.price");
      cfg.price_sweep.present = true;
      cfg.price_sweep.lmo_id = pr.at("lmo").get<int>();
      cfg.price_sweep.min = pr.at("min").get<double>();
      cfg.price_sweep.max = pr.at("max").get<double>();
      cfg.price_sweep.steps = pr.at("steps").get<int>();
      if (!(cfg.price_sweep.min > 0) || !(cfg.price_sweep.max > cfg.price_sweep.min) ||
          cfg.price_sweep.steps < 2)
        throw ConfigError("config: sweeps.price needs 0 < min < max and steps >= 2");
      bool found = false;
      for (const auto& lmo : cfg.lmos) found = found || lmo.id == cfg.price_sweep.lmo_id;
      if (!found) throw ConfigError("config: sweeps.price.lmo references an unknown LMO id");
    }
  }

  if (doc.contains("compare")) {
    const auto& c = doc.at("compare");
    check_keys(c, {"m_values", "fixed_price", "random_hi", "random_draws"}, "compare");
    cfg.compare.present = true;
    cfg.compare.m_values = c.at("m_values").get<std::vector<int>>();
    cfg.compare.fixed_price = get_or(c, "fixed_price", cfg.compare.fixed_price);
    cfg.compare.random_hi = get_or(c, "random_hi", cfg.compare.random_hi);
    cfg.compare.random_draws = get_or(c, "random_draws", cfg.compare.random_draws);
    if (cfg.compare.m_values.empty()) throw ConfigError("config: compare.m_values is empty");
    for (int m : cfg.compare.m_values)
      if (m < 2 || m > static_cast<int>(cfg.lmos.size()))
        throw ConfigError("config: compare.m_values entries must be in [2, lmo count]");
    if (!(cfg.compare.fixed_price > 0)) throw ConfigError("config: compare.fixed_price must be > 0");
    if (!(cfg.compare.random_hi > 0)) throw ConfigError("config: compare.random_hi must be > 0");
    if (cfg.compare.random_draws < 1)
      throw ConfigError("config: compare.random_draws must be >= 1");
  }

  if (cfg.policy_dir.empty()) cfg.policy_dir = cfg.output_dir;
  cfg.config_hash = cfgdetail::fnv1a(doc.dump());
  return cfg;
}

inline ExperimentConfig ExperimentConfig::load_file(const std::string& path,
                                                    std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }
  return from_json(doc, seed_override);
}

}  // namespace flgame

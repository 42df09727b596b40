#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "flgame/env.hpp"
#include "flgame/rng.hpp"

using namespace flgame;

namespace {

EnvConfig base_config() {
  EnvConfig cfg;
  cfg.worker_count = 2;
  cfg.budget = 4.0;
  cfg.payout_rate = 0.5;
  cfg.contribution_mean = 0.5;
  cfg.contribution_std = 0.0;
  cfg.capacity = 10.0;
  cfg.max_steps = 5;
  cfg.seed = 11;
  cfg.params.theta = 0.5;
  cfg.params.phi = -0.05;
  return cfg;
}

std::vector<Transition> run_random_episode(const EnvConfig& cfg, std::uint64_t policy_seed) {
  WorkerEnv env(cfg);
  std::vector<Transition> transitions;
  std::vector<int> actions(cfg.worker_count, 0);
  while (!env.done()) {
    for (int i = 0; i < cfg.worker_count; ++i) {
      const double u = rng::uniform({policy_seed, static_cast<std::uint64_t>(env.state().step),
                                     static_cast<std::uint64_t>(i)});
      actions[i] = u < 0.6 ? 1 : 0;
    }
    transitions.push_back(env.step(actions));
  }
  return transitions;
}

}  // namespace

TEST_CASE("reset state") {
  const auto cfg = base_config();
  WorkerEnv env(cfg);
  CHECK(env.state().remaining_ratio == 1.0);
  CHECK(env.state().step == 0);
  for (double f : env.state().fatigue)
    CHECK_THAT(f, Catch::Matchers::WithinAbs(0.09890130573694068, 1e-15));
  const auto obs = env.observation();
  REQUIRE(obs.size() == 3);
  CHECK(obs[2] == 1.0);

  WorkerEnv env2(cfg);
  CHECK(env.observation() == env2.observation());
}

TEST_CASE("all-abstain step pays the penalty and leaves the budget alone") {
  const auto cfg = base_config();
  WorkerEnv env(cfg);
  const std::vector<int> actions{0, 0};
  for (int t = 0; t < cfg.max_steps; ++t) {
    REQUIRE_FALSE(env.done());
    const auto tr = env.step(actions);
    for (double r : tr.rewards) CHECK(r == cfg.params.phi);
    CHECK(tr.pool == 0.0);
    CHECK(tr.next_state.remaining_ratio == 1.0);
  }
  CHECK(env.done());  // horizon only
  CHECK_THROWS_AS(env.step(actions), ContractError);
}

TEST_CASE("single participant with full payout drains the budget in one step") {
  auto cfg = base_config();
  cfg.worker_count = 1;
  cfg.payout_rate = 1.0;
  cfg.params.theta = 0.0;
  WorkerEnv env(cfg);
  const auto tr = env.step(std::vector<int>{1});
  CHECK_THAT(tr.contributions[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(tr.rewards[0],
             Catch::Matchers::WithinAbs(4.0 - 0.09890130573694068, 1e-12));
  CHECK(tr.next_state.remaining_ratio == 0.0);
  CHECK(tr.done);

  const auto totals = episode_totals(std::vector<Transition>{tr});
  CHECK_THAT(totals.total_data, Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(totals.total_paid, Catch::Matchers::WithinAbs(4.0, 1e-15));
}

TEST_CASE("two identical deterministic participants split the pool evenly") {
  const auto cfg = base_config();
  WorkerEnv env(cfg);
  const auto tr = env.step(std::vector<int>{1, 1});
  CHECK(tr.contributions[0] == tr.contributions[1]);
  CHECK(tr.rewards[0] == tr.rewards[1]);
  const double expected = 0.5 * (0.5 * 4.0) + 0.0 - 0.09890130573694068;
  CHECK_THAT(tr.rewards[0], Catch::Matchers::WithinAbs(expected, 1e-12));
}

TEST_CASE("action vector length is checked") {
  const auto cfg = base_config();
  WorkerEnv env(cfg);
  CHECK_THROWS_AS(env.step(std::vector<int>{1}), ContractError);
}

TEST_CASE("fatigue tracks cumulative contribution") {
  auto cfg = base_config();
  cfg.worker_count = 1;
  cfg.payout_rate = 0.1;
  WorkerEnv env(cfg);
  auto tr = env.step(std::vector<int>{1});
  CHECK_THAT(tr.next_state.fatigue[0],
             Catch::Matchers::WithinAbs(fatigue(0.5, cfg.params), 1e-15));
  tr = env.step(std::vector<int>{1});
  CHECK_THAT(tr.next_state.fatigue[0],
             Catch::Matchers::WithinAbs(fatigue(1.0, cfg.params), 1e-15));
}

TEST_CASE("capacity caps contributions exactly") {
  auto cfg = base_config();
  cfg.worker_count = 1;
  cfg.capacity = 0.75;
  cfg.max_steps = 10;
  WorkerEnv env(cfg);
  env.step(std::vector<int>{1});
  const auto tr = env.step(std::vector<int>{1});
  CHECK_THAT(tr.contributions[0], Catch::Matchers::WithinAbs(0.25, 1e-15));
  CHECK(tr.next_state.cumulative_data[0] == 0.75);
  CHECK(tr.done);  // all workers at capacity
}

TEST_CASE("episode totals of an empty episode") {
  const auto totals = episode_totals(std::vector<Transition>{});
  CHECK(totals.total_data == 0.0);
  CHECK(totals.total_paid == 0.0);
}

TEST_CASE("reward-sum accounting flag") {
  auto cfg = base_config();
  WorkerEnv env(cfg);
  std::vector<Transition> transitions{env.step(std::vector<int>{1, 0})};
  const auto disbursed = episode_totals(transitions, false);
  const auto rewards = episode_totals(transitions, true);
  CHECK(disbursed.total_paid == transitions[0].pool);
  CHECK_THAT(rewards.total_paid,
             Catch::Matchers::WithinAbs(transitions[0].rewards[0] + transitions[0].rewards[1],
                                        1e-15));
}

TEST_CASE("episode invariants over many random configurations") {
  for (std::uint64_t scenario = 0; scenario < 300; ++scenario) {
    EnvConfig cfg;
    cfg.worker_count = 1 + static_cast<int>(rng::uniform({scenario, 1}) * 6.0);
    cfg.budget = rng::uniform_range(0.5, 20.0, {scenario, 2});
    cfg.payout_rate = rng::uniform_range(0.05, 1.0, {scenario, 3});
    cfg.contribution_mean = rng::uniform_range(0.05, 1.0, {scenario, 4});
    cfg.contribution_std = rng::uniform_range(0.0, 0.5, {scenario, 5});
    cfg.capacity = rng::uniform_range(0.5, 4.0, {scenario, 6});
    cfg.max_steps = 1 + static_cast<int>(rng::uniform({scenario, 7}) * 25.0);
    cfg.seed = rng::mix({scenario, 8});
    cfg.params.theta = rng::uniform_range(0.0, 1.0, {scenario, 9});
    cfg.params.phi = -rng::uniform_range(0.0, 0.2, {scenario, 10});

    const auto transitions = run_random_episode(cfg, rng::mix({scenario, 11}));

    double paid = 0.0;
    double prev_ratio = 1.0;
    for (const auto& tr : transitions) {
      paid += tr.pool;
      // shares within a step sum to the pool
      double sum_d = 0.0;
      for (double d : tr.contributions) sum_d += d;
      if (sum_d > 0) {
        double shares = 0.0;
        for (int i = 0; i < cfg.worker_count; ++i)
          shares += (tr.contributions[i] / sum_d) * tr.pool;
        CHECK_THAT(shares, Catch::Matchers::WithinAbs(tr.pool, 1e-9));
      }
      CHECK(tr.next_state.remaining_ratio <= prev_ratio + 1e-15);
      prev_ratio = tr.next_state.remaining_ratio;
      for (double c : tr.next_state.cumulative_data) CHECK(c <= cfg.capacity + 1e-12);
    }
    const double remaining = transitions.back().next_state.remaining_ratio * cfg.budget;
    CHECK_THAT(remaining + paid, Catch::Matchers::WithinAbs(cfg.budget, 1e-9));
  }
}

TEST_CASE("episodes are bit-reproducible under a fixed seed") {
  auto cfg = base_config();
  cfg.contribution_std = 0.3;
  const auto a = run_random_episode(cfg, 99);
  const auto b = run_random_episode(cfg, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].contributions == b[t].contributions);
    CHECK(a[t].rewards == b[t].rewards);
    CHECK(a[t].next_state.remaining_ratio == b[t].next_state.remaining_ratio);
  }
}

TEST_CASE("config validation") {
  auto cfg = base_config();
  cfg.payout_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config();
  cfg.budget = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = base_config();
  cfg.capacity = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

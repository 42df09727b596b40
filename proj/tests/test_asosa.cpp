#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "flgame/asosa.hpp"

using namespace flgame;

namespace {

SystemParams make_params(double lambda, double alpha, double beta) {
  SystemParams p;
  p.lambda = lambda;
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

std::vector<LmoProfile> uniform_profiles(int m, double price) {
  std::vector<LmoProfile> profiles;
  for (int i = 0; i < m; ++i) profiles.push_back({i + 1, price, 0.0, 2});
  return profiles;
}

}  // namespace

TEST_CASE("linear stub at the realized price is an immediate fixed point") {
  const auto params = make_params(1.0, 10.0, 1.0);
  const auto profiles = uniform_profiles(3, 0.2);
  // data = c * B with c = 1/P means the realized price equals the assumed one
  LinearWorkerLayer layer(std::vector<double>(3, 1.0 / 0.2));
  const auto trace = asosa(profiles, layer, params);
  CHECK(trace.termination == AsosaTermination::converged);
  CHECK(trace.iterations == 1);
  for (double p : trace.final_prices) CHECK_THAT(p, Catch::Matchers::WithinRel(0.2, 0.02));
}

TEST_CASE("elimination scenario drops LMO 4 in iteration 1 and then converges") {
  const auto params = make_params(1.0, 10.0, 1.0);
  std::vector<LmoProfile> profiles{
      {1, 0.2, 0.0, 2}, {2, 0.2, 0.0, 2}, {3, 0.2, 0.0, 2}, {4, 1.0, 0.0, 2}};
  LinearWorkerLayer layer(std::vector<double>(4, 5.0));
  const auto trace = asosa(profiles, layer, params);

  bool saw_elimination = false;
  for (const auto& row : trace.rows)
    if (row.iteration == 1 && row.lmo == 4) {
      saw_elimination = true;
      CHECK(row.status == "eliminated");
      CHECK(row.zeta_theory <= 0.0);
    }
  CHECK(saw_elimination);
  CHECK(trace.termination == AsosaTermination::converged);
  CHECK(trace.iterations <= 50);
  CHECK(trace.final_active_ids == std::vector<int>{1, 2, 3});

  // the active set never regrows
  std::size_t prev_active = profiles.size();
  for (int it = 1; it <= trace.iterations; ++it) {
    std::set<int> ids;
    for (const auto& row : trace.rows)
      if (row.iteration == it && row.status == "active") ids.insert(row.lmo);
    CHECK(ids.size() <= prev_active);
    prev_active = ids.size();
  }
}

TEST_CASE("per-iteration rows satisfy the equilibrium identities") {
  const auto params = make_params(1.0, 10.0, 1.0);
  std::vector<LmoProfile> profiles{
      {1, 0.2, 0.0, 2}, {2, 0.25, 0.0, 2}, {3, 0.3, 0.0, 2}};
  LinearWorkerLayer layer({4.0, 5.0, 6.0});
  const auto trace = asosa(profiles, layer, params);

  std::map<int, std::vector<const AsosaLmoRecord*>> by_iter;
  for (const auto& row : trace.rows)
    if (row.status == "active") by_iter[row.iteration].push_back(&row);
  REQUIRE_FALSE(by_iter.empty());
  for (const auto& [iter, rows] : by_iter) {
    double z = 0.0;
    for (const auto* row : rows) z += row->zeta_theory;
    for (const auto* row : rows) {
      // Theorem-4 range and the Eq.(3) share identity
      CHECK(row->budget_theory > 0.0);
      CHECK(row->budget_theory < row->tau);
      const double share = (row->zeta_theory / z) * row->tau;
      CHECK_THAT(row->budget_theory,
                 Catch::Matchers::WithinAbs(share, 1e-9 * std::max(1.0, share)));
    }
  }
}

TEST_CASE("price-update identity links consecutive iterations") {
  const auto params = make_params(1.0, 10.0, 1.0);
  std::vector<LmoProfile> profiles{{1, 0.4, 0.0, 2}, {2, 0.5, 0.0, 2}};
  LinearWorkerLayer layer({2.0, 2.5});
  AsosaOptions opts;
  opts.max_iterations = 6;
  const auto trace = asosa(profiles, layer, params, opts);

  std::map<std::pair<int, int>, const AsosaLmoRecord*> rows;
  for (const auto& row : trace.rows)
    if (row.status == "active") rows[{row.iteration, row.lmo}] = &row;
  int checked = 0;
  for (const auto& [key, row] : rows) {
    const auto next = rows.find({key.first + 1, key.second});
    if (next == rows.end()) continue;
    CHECK_THAT(next->second->price * row->total_data,
               Catch::Matchers::WithinAbs(row->total_paid,
                                          1e-9 * std::max(1.0, row->total_paid)));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("idempotence at the reported fixed point") {
  const auto params = make_params(1.0, 10.0, 1.0);
  const auto profiles = uniform_profiles(3, 0.2);
  LinearWorkerLayer layer(std::vector<double>(3, 5.0));
  const auto trace = asosa(profiles, layer, params);
  REQUIRE(trace.termination == AsosaTermination::converged);

  // restart from the converged prices: strategies must not move
  auto fixed_profiles = profiles;
  for (std::size_t m = 0; m < fixed_profiles.size(); ++m)
    fixed_profiles[m].price = trace.final_prices[m];
  const auto again = asosa(fixed_profiles, layer, params);
  REQUIRE(again.termination == AsosaTermination::converged);
  const double tol = 1e-3 * optimal_total_data_at_tau(again.final_tau, params);
  for (std::size_t m = 0; m < trace.final_zetas.size(); ++m)
    CHECK(std::abs(again.final_zetas[m] - trace.final_zetas[m]) <= tol);
}

TEST_CASE("non-positive tau terminates immediately with no rows") {
  const auto params = make_params(1.0, 2.0, 1.0);
  const auto profiles = uniform_profiles(2, 3.0);  // sum(P)/(beta*(M-1)) = 6 > 2
  LinearWorkerLayer layer(std::vector<double>(2, 1.0));
  const auto trace = asosa(profiles, layer, params);
  CHECK(trace.termination == AsosaTermination::tau_nonpositive);
  CHECK(trace.rows.empty());
}

TEST_CASE("never-participating workers eliminate everyone") {
  const auto params = make_params(1.0, 10.0, 1.0);
  const auto profiles = uniform_profiles(2, 0.5);
  EnvConfig env;
  env.worker_count = 2;
  env.contribution_std = 0.0;
  env.max_steps = 3;
  env.seed = 9;
  std::vector<std::shared_ptr<const Policy>> policies{
      std::make_shared<ConstantPolicy>(2, 0.0), std::make_shared<ConstantPolicy>(2, 0.0)};
  AsosaOptions opts;
  opts.obsa.eval_episodes = 2;
  opts.obsa.max_bisections = 6;
  opts.obsa.monotonicity_check = false;
  const auto trace = asosa(profiles, policies, params, env, opts);
  CHECK(trace.termination == AsosaTermination::tau_nonpositive);
  CHECK(trace.diagnostic == "fewer than two active LMOs remain");
  for (const auto& row : trace.rows)
    if (row.iteration == 1) CHECK(row.status == "eliminated_no_data");
}

TEST_CASE("asosa rejects a single LMO") {
  const auto params = make_params(1.0, 10.0, 1.0);
  LinearWorkerLayer layer({1.0});
  CHECK_THROWS_AS(asosa(uniform_profiles(1, 0.5), layer, params), MechanismUndefinedError);
}

TEST_CASE("fixed pricing with symmetric prices splits the total evenly") {
  const auto params = make_params(1.0, 30.0, 2.0);
  const auto profiles = uniform_profiles(4, 1.0);
  LinearWorkerLayer layer(std::vector<double>(4, 1.0));
  const auto outcome = run_fixed_pricing(profiles, 1.0, params, layer);
  REQUIRE_FALSE(outcome.terminated);
  REQUIRE(outcome.rows.size() == 4);
  const double expected = optimal_total_data_at_tau(outcome.tau, params) / 4.0;
  for (const auto& row : outcome.rows)
    CHECK_THAT(row.zeta_theory, Catch::Matchers::WithinAbs(expected, 1e-9));
}

TEST_CASE("fixed pricing with an unaffordable price terminates") {
  const auto params = make_params(1.0, 10.0, 1.0);
  const auto profiles = uniform_profiles(2, 1.0);
  LinearWorkerLayer layer(std::vector<double>(2, 1.0));
  const auto outcome = run_fixed_pricing(profiles, 10.0, params, layer);
  CHECK(outcome.terminated);
  CHECK(outcome.tau <= 0.0);
  CHECK(outcome.rows.empty());
}

TEST_CASE("fixed pricing equals the first asosa iteration at the same price") {
  const auto params = make_params(1.0, 10.0, 1.0);
  const auto profiles = uniform_profiles(3, 0.4);
  LinearWorkerLayer layer(std::vector<double>(3, 2.0));
  const auto fixed = run_fixed_pricing(profiles, 0.4, params, layer);
  AsosaOptions opts;
  opts.max_iterations = 1;
  const auto trace = asosa(profiles, layer, params, opts);
  REQUIRE(fixed.rows.size() == 3);
  for (std::size_t m = 0; m < 3; ++m) {
    const auto& a = trace.rows[m];
    const auto& f = fixed.rows[m];
    CHECK(a.lmo == f.lmo);
    CHECK_THAT(a.zeta_theory, Catch::Matchers::WithinAbs(f.zeta_theory, 1e-12));
    CHECK_THAT(a.budget_theory, Catch::Matchers::WithinAbs(f.budget_theory, 1e-12));
    CHECK_THAT(a.budget_actual, Catch::Matchers::WithinAbs(f.budget_actual, 1e-12));
  }
}

TEST_CASE("random pricing is reproducible and approaches lambda*alpha as hi -> 0") {
  const auto params = make_params(1.0, 10.0, 1.0);
  const auto profiles = uniform_profiles(3, 1.0);
  LinearWorkerLayer layer(std::vector<double>(3, 1.0));
  const auto a = run_random_pricing(profiles, 5.0, 77, params, layer);
  const auto b = run_random_pricing(profiles, 5.0, 77, params, layer);
  CHECK(a.tau == b.tau);
  CHECK(a.tp_utility == b.tp_utility);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t m = 0; m < a.rows.size(); ++m) CHECK(a.rows[m].price == b.rows[m].price);

  const auto tiny = run_random_pricing(profiles, 1e-9, 77, params, layer);
  CHECK_THAT(tiny.tau, Catch::Matchers::WithinAbs(10.0, 1e-6));
}

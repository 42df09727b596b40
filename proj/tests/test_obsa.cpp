#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "flgame/obsa.hpp"

using namespace flgame;

namespace {

BudgetProbe linear_probe(double c) {
  return [c](double budget) { return ObsaProbeResult{c * budget, budget}; };
}

}  // namespace

TEST_CASE("bisection on the linear stub hits the analytic bound") {
  ObsaOptions opts;
  opts.monotonicity_check = false;
  const auto res = obsa_search(linear_probe(1.0), 16.0, 5.0, 0.01, opts);
  CHECK(res.converged);
  CHECK(res.iterations <= 11);  // ceil(log2(16 / 0.01))
  CHECK(std::abs(res.budget_star - 5.0) < 0.01);
  CHECK_THAT(res.total_data, Catch::Matchers::WithinAbs(5.0, 0.01));
  CHECK_THAT(res.total_paid, Catch::Matchers::WithinAbs(res.budget_star, 1e-12));
}

TEST_CASE("interval width halves exactly on a dyadic range") {
  ObsaOptions opts;
  opts.monotonicity_check = false;
  opts.max_bisections = 20;
  // target at an irrational point so the loop runs the full budget of steps
  const double target = 16.0 / 3.0;
  const auto res = obsa_search(linear_probe(1.0), 16.0, target, 1e-7, opts);
  double lo = 0.0, hi = 16.0;
  for (const auto& it : res.trace) {
    const double mid = (lo + hi) / 2.0;
    CHECK(it.b_mid == mid);
    CHECK(hi - lo == 16.0 * std::pow(0.5, it.iter - 1));
    if (it.total_data > target)
      hi = mid;
    else
      lo = mid;
  }
}

TEST_CASE("non-positive targets and parameters are rejected") {
  CHECK_THROWS_AS(obsa_search(linear_probe(1.0), 16.0, 0.0, 0.01), DomainError);
  CHECK_THROWS_AS(obsa_search(linear_probe(1.0), 0.0, 1.0, 0.01), DomainError);
  CHECK_THROWS_AS(obsa_search(linear_probe(1.0), 16.0, 1.0, 0.0), DomainError);
}

TEST_CASE("flat zero response reports honest non-convergence") {
  ObsaOptions opts;
  opts.monotonicity_check = false;
  const BudgetProbe zero = [](double) { return ObsaProbeResult{0.0, 0.0}; };
  const auto res = obsa_search(zero, 16.0, 5.0, 0.01, opts);
  CHECK_FALSE(res.converged);
  CHECK(res.diagnostic == ObsaDiagnostic::max_bisections_reached);
  CHECK(res.iterations == opts.max_bisections);
}

TEST_CASE("monotonicity warning fires on a decreasing response") {
  ObsaOptions opts;
  opts.max_bisections = 8;
  const BudgetProbe decreasing = [](double budget) {
    return ObsaProbeResult{16.0 - budget, budget};
  };
  const auto res = obsa_search(decreasing, 16.0, 100.0, 0.01, opts);
  CHECK(res.monotonicity_warning);
  const auto res2 = obsa_search(linear_probe(1.0), 16.0, 5.0, 0.01, opts);
  CHECK_FALSE(res2.monotonicity_warning);
}

TEST_CASE("random linear instances converge within the iteration budget") {
  for (std::uint64_t k = 0; k < 20; ++k) {
    const double c = rng::uniform_range(0.5, 2.0, {k, 1});
    const double tau = rng::uniform_range(4.0, 64.0, {k, 2});
    const double target_budget = rng::uniform_range(0.1 * tau, 0.9 * tau, {k, 3});
    const double zeta = c * target_budget;
    const double sigma_budget = rng::uniform_range(1e-4, 1e-2, {k, 4}) * tau;
    ObsaOptions opts;
    opts.monotonicity_check = false;
    opts.max_bisections = 64;
    const auto res = obsa_search(linear_probe(c), tau, zeta, c * sigma_budget, opts);
    REQUIRE(res.converged);
    CHECK(std::abs(res.budget_star - zeta / c) < sigma_budget);
    CHECK(res.iterations <= static_cast<int>(std::ceil(std::log2(tau / sigma_budget))));
  }
}

TEST_CASE("capacity bound produces the dedicated diagnostic") {
  EnvConfig env;
  env.worker_count = 2;
  env.capacity = 10.0;
  env.contribution_std = 0.0;
  env.max_steps = 3;
  env.seed = 5;
  SystemParams params;
  const ConstantPolicy always(2, 1.0);
  const auto res = obsa(2, 8.0, 25.0, always, env, params);  // 25 > 2 * 10
  CHECK_FALSE(res.converged);
  CHECK(res.diagnostic == ObsaDiagnostic::target_exceeds_capacity);
  CHECK(std::string(to_string(res.diagnostic)) == "target exceeds worker capacity");
}

TEST_CASE("simulated probe with a reachable flat target converges immediately") {
  EnvConfig env;
  env.worker_count = 2;
  env.capacity = 10.0;
  env.contribution_mean = 0.5;
  env.contribution_std = 0.0;
  env.max_steps = 3;
  env.seed = 5;
  SystemParams params;
  const ConstantPolicy always(2, 1.0);
  ObsaOptions opts;
  opts.eval_episodes = 2;
  // deterministic always-participate workers collect exactly 3.0
  const auto res = obsa(2, 8.0, 3.0, always, env, params, opts);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
}

TEST_CASE("tolerance resolution: relative by default, absolute on request") {
  SystemParams params;
  params.obsa_tolerance = 0.5;
  ObsaOptions opts;
  CHECK_THAT(resolve_obsa_tolerance(10.0, params, opts), Catch::Matchers::WithinAbs(0.5, 1e-15));
  opts.absolute_tolerance = false;
  opts.relative_tolerance = 0.05;
  CHECK_THAT(resolve_obsa_tolerance(10.0, params, opts), Catch::Matchers::WithinAbs(0.5, 1e-15));
  params.obsa_tolerance = 2.0;
  opts.absolute_tolerance = true;
  CHECK_THAT(resolve_obsa_tolerance(10.0, params, opts), Catch::Matchers::WithinAbs(2.0, 1e-15));
}

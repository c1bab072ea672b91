#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "morel/theory_verify.hpp"
#include "test_support.hpp"

using namespace morel;

TEST_CASE("exact model, exact start distribution, nothing unknown: bounds are tight") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const int S = 5, A = 2, m = 8;
    TabularMdp mdp = testing::random_mdp(rng, S, A, 0.9);
    TabularCountModel model(S, A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        std::vector<double> row(S, 0.0);
        for (int i = 0; i < m; ++i) {
          const int next = static_cast<int>(rng.below(S));
          row[next] += 1.0 / m;
          model.add(s, a, next, mdp.reward(s, a));
        }
        mdp.set_transition(s, a, row);
      }
    }
    const UsadOracle usad(mdp, model, 0.1);
    REQUIRE(usad.unknown_set().empty());
    const TabularPolicy pi = testing::random_policy(rng, S, A);
    const BoundRecord r = check_value_bounds(mdp, model, usad, mdp.rho0(), pi, mdp.r_max());
    CHECK(r.J_pmdp == doctest::Approx(r.J_true).epsilon(1e-10));
    CHECK(r.alpha_used < 1e-15);
    CHECK(r.hitting_term == 0.0);
    CHECK(std::abs(r.lower_slack) < 1e-10);
    CHECK(std::abs(r.upper_slack) < 1e-10);
    CHECK(r.satisfied);
  }
}

TEST_CASE("a policy that starts inside the unknown set has hitting term 1") {
  TabularMdp mdp(2, 1, 0.8, 1.0);
  mdp.set_transition(0, 0, 1);
  mdp.set_transition(1, 0, 1);
  mdp.set_reward(0, 0, 1.0);
  mdp.set_reward(1, 0, 1.0);
  mdp.set_rho0({1.0, 0.0});
  TabularCountModel model(2, 1);
  model.add(1, 0, 1, 1.0);
  const UsadOracle usad(mdp, model, 0.1);
  const BoundRecord r = check_value_bounds(mdp, model, usad, mdp.rho0(), TabularPolicy::uniform(2, 1), 1.0);
  CHECK(r.hitting_term == doctest::Approx(1.0));
  // 1 now, then HALT at -1: 1 - 0.8 / 0.2 = -3, versus 5 in truth
  CHECK(r.J_pmdp == doctest::Approx(-3.0));
  CHECK(r.J_true == doctest::Approx(5.0));
  CHECK(r.satisfied);
}

TEST_CASE("value, suboptimality and hitting bounds on random instances") {
  const SuiteResult suite = run_bound_suite(30, 100, 7);
  CHECK(suite.value_bounds.size() == 30);
  CHECK(suite.value_bound_failures == 0);
  CHECK(suite.suboptimality_failures == 0);
  CHECK(suite.hitting_failures == 0);
  int with_unknown = 0;
  for (const BoundRecord& r : suite.value_bounds) with_unknown += r.hitting_term > 0.0;
  CHECK(with_unknown > 5);
  std::ostringstream csv;
  write_bound_csv(suite.value_bounds, csv);
  CHECK(csv.str().rfind("instance,seed,J_pmdp,J_true,dtv_rho0,alpha_used,hitting_term,", 0) == 0);
  std::ostringstream csv2;
  write_suboptimality_csv(suite.suboptimality, csv2);
  const std::string text = csv2.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 31);
}

TEST_CASE("random instances are reproducible") {
  const RandomInstance a = random_instance(42);
  const RandomInstance b = random_instance(42);
  CHECK(a.dataset == b.dataset);
  CHECK(a.policy == b.policy);
  CHECK(a.usad_alpha == b.usad_alpha);
  CHECK(a.dataset.size() >= 50);
  CHECK(a.dataset.size() <= 5000);
}

TEST_CASE("hitting bound edge cases") {
  Rng rng(2);
  const TabularMdp mdp = testing::random_mdp(rng, 4, 2, 0.75);
  const TabularPolicy pi = testing::random_policy(rng, 4, 2);
  const HittingRecord none = check_hitting_bound(mdp, pi, PairSet(4, 2));
  CHECK(none.lhs == 0.0);
  CHECK(none.rhs == 0.0);
  CHECK(none.satisfied);
  PairSet all(4, 2);
  for (int s = 0; s < 4; ++s) {
    for (int a = 0; a < 2; ++a) all.insert(s, a);
  }
  const HittingRecord full = check_hitting_bound(mdp, pi, all);
  CHECK(full.lhs == doctest::Approx(1.0));
  CHECK(full.rhs == doctest::Approx(4.0));
}

TEST_CASE("finite-sample term shrinks like n^-1/2") {
  const TabularMdp chain = build_chain({});
  const TabularPolicy pib = TabularPolicy::stochastic(5, 2, {0.3, 0.7, 0.3, 0.7, 0.3, 0.7, 0.3, 0.7, 0.3, 0.7});
  const SampleErrorTerms a = sample_error_terms(chain, pib, 1000);
  const SampleErrorTerms b = sample_error_terms(chain, pib, 4000);
  CHECK(a.rho0_min == 1.0);
  CHECK(a.p_min == doctest::Approx(0.1));
  CHECK(b.epsilon_n == doctest::Approx(0.5 * a.epsilon_n));
  const Mat d = discounted_visitation(chain, pib);
  CHECK(a.d_pib_min == doctest::Approx(d.minCoeff()));
}

TEST_CASE("improvement over the behavior policy on the chain") {
  const TabularMdp chain = build_chain({});
  const TabularPolicy pib = TabularPolicy::stochastic(5, 2, {0.4, 0.6, 0.4, 0.6, 0.4, 0.6, 0.4, 0.6, 0.4, 0.6});
  TabularPipelineConfig cfg;
  const std::vector<ImprovementRow> rows = check_improvement(chain, pib, cfg, {200, 10000}, {1, 2, 3}, 30);
  REQUIRE(rows.size() == 6);
  const double tol = 0.01 * chain.r_max() / (1.0 - chain.gamma());
  for (const ImprovementRow& r : rows) {
    if (r.n == 10000) CHECK(r.gap <= r.eps_pi + tol);
  }

  // an already optimal behavior policy is matched
  const OptimalSolution opt = optimal_policy(chain);
  std::vector<double> soft(10);
  for (int s = 0; s < 5; ++s) {
    soft[2 * s + opt.policy.greedy_action(s)] = 0.9;
    soft[2 * s + 1 - opt.policy.greedy_action(s)] = 0.1;
  }
  const std::vector<ImprovementRow> best =
      check_improvement(chain, TabularPolicy::stochastic(5, 2, soft), cfg, {10000}, {4}, 30);
  CHECK(opt.J - best[0].J_out <= best[0].eps_pi + tol);
}

TEST_CASE("naive pipeline plans in the plain MLE model") {
  const TabularMdp chain = build_chain({});
  const TabularPolicy pib = TabularPolicy::uniform(5, 2);
  const OfflineDataset d = collect_tabular(chain, pib, 5000, 30, 5);
  TabularPipelineConfig cfg;
  cfg.detector = TabularPipelineConfig::Detector::none;
  const TabularPipelineResult r = run_tabular_pipeline(chain, d, cfg);
  CHECK(r.halt == -1);
  CHECK(r.planning_mdp.n_states() == 5);
  CHECK(r.unknown.empty());
  CHECK(exact_policy_value(chain, r.policy).J == doctest::Approx(optimal_policy(chain).J).epsilon(1e-6));
}

TEST_CASE("counterexample experiment against closed forms") {
  const CounterexampleSpec spec;
  const CounterexampleResult r = run_counterexample_experiment(spec, 20000, 40, 3);
  const double g = spec.gamma;
  const int k = spec.k();
  const double p0 = spec.p0();
  CHECK(r.lower_bound_value == doctest::Approx(0.3338).epsilon(1e-3));
  CHECK(r.J_star == doctest::Approx(((1.0 - p0) + p0 * std::pow(g, k)) / (1.0 - g)));
  // the learned policy never leaves the 0-1 loop
  CHECK(r.J_out == doctest::Approx((1.0 - p0) / (1.0 - g)));
  CHECK(r.suboptimality == doctest::Approx(p0 * std::pow(g, k) / (1.0 - g)));
  CHECK(r.max_suboptimality == doctest::Approx(r.suboptimality));
  double d = 0.0;
  for (int t = 1; t <= k - 1; ++t) d += (1.0 - g) * p0 * std::pow(g, t);
  CHECK(r.d_pistar_UD == doctest::Approx(d));
  CHECK(r.coverage_ok == (d <= spec.epsilon));
  CHECK(r.bound_ok == (r.suboptimality >= r.lower_bound_value));
}

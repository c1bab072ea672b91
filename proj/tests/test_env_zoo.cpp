#include "doctest.h"

#include <cmath>
#include <numbers>

#include "morel/env_zoo.hpp"
#include "morel/tabular.hpp"

using namespace morel;

TEST_CASE("counterexample derived constants") {
  const CounterexampleSpec spec{0.95, 0.01, 1.0};
  CHECK(spec.k() == 30);
  CHECK(spec.p0() == doctest::Approx(0.01 / (0.05 * std::log(20.0))));
  CHECK(spec.p0() == doctest::Approx(0.06676).epsilon(1e-4));
  CHECK(spec.lower_bound_value() == doctest::Approx(100.0 * 0.01 / std::log(20.0) / 1.0));
  CHECK(spec.lower_bound_value() == doctest::Approx(0.3338).epsilon(1e-3));

  CHECK_THROWS_AS(build_counterexample({0.9, 0.01, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_counterexample({0.95, 0.02, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_counterexample({0.95, 0.0, 1.0}), std::invalid_argument);
  const double upper = 0.05 / std::log(20.0);
  CHECK_NOTHROW(build_counterexample({0.95, upper, 1.0}));
  CHECK(build_counterexample({0.95, upper, 1.0}).p0 == doctest::Approx(1.0 / (std::log(20.0) * std::log(20.0))));
}

TEST_CASE("counterexample structure and values") {
  const Counterexample cx = build_counterexample({0.95, 0.01, 1.0});
  const int k = cx.k;
  const double g = 0.95, p0 = cx.p0;
  REQUIRE(cx.mdp.n_states() == k + 1);
  REQUIRE(cx.mdp.n_actions() == 3);
  CHECK(cx.mdp.rho0()[0] == doctest::Approx(p0));
  CHECK(cx.mdp.rho0()[k] == doctest::Approx(1.0 - p0));

  // a1 walks the chain, a2 at state 2 returns to state 1
  for (int s = 0; s < k; ++s) CHECK(cx.mdp.p(s, 0, s + 1) == 1.0);
  CHECK(cx.mdp.p(k, 0, k) == 1.0);
  CHECK(cx.mdp.p(1, 1, 0) == 1.0);
  CHECK(cx.mdp.reward(k, 0) == 1.0);
  CHECK(cx.behavior.greedy_action(0) == 0);
  CHECK(cx.behavior.greedy_action(1) == 1);
  CHECK(cx.behavior.greedy_action(k) == 0);

  // closed forms: pi* reaches the rewarding self-loop after k steps, pi_b
  // bounces between states 1 and 2 forever
  const double j_star = exact_policy_value(cx.mdp, cx.optimal).J;
  const double j_b = exact_policy_value(cx.mdp, cx.behavior).J;
  CHECK(j_star == doctest::Approx(((1.0 - p0) + p0 * std::pow(g, k)) / (1.0 - g)).epsilon(1e-12));
  CHECK(j_b == doctest::Approx((1.0 - p0) / (1.0 - g)).epsilon(1e-12));
  CHECK(j_star - j_b > 0.0);
  CHECK(j_star >= (1.0 - p0) / (1.0 - g) * (1.0 - k * (1.0 - g)));
  CHECK(optimal_policy(cx.mdp).J == doctest::Approx(j_star).epsilon(1e-12));
}

TEST_CASE("counterexample: leaving the chain anywhere on states 2..k loses the start-1 reward") {
  const Counterexample cx = build_counterexample({0.95, 0.01, 1.0});
  const double j_star = exact_policy_value(cx.mdp, cx.optimal).J;
  const double lost = cx.p0 * std::pow(0.95, cx.k) / 0.05;
  for (int s = 1; s < cx.k; ++s) {
    for (int a : {1, 2}) {
      std::vector<int> acts(cx.k + 1, 0);
      acts[s] = a;
      const double j = exact_policy_value(cx.mdp, TabularPolicy::deterministic(acts, 3)).J;
      CHECK(j_star - j == doctest::Approx(lost).epsilon(1e-10));
    }
  }
}

TEST_CASE("random_tabular") {
  const TabularMdp a = random_tabular(6, 3, 0.4, 17);
  const TabularMdp b = random_tabular(6, 3, 0.4, 17);
  CHECK_NOTHROW(a.validate());
  for (int s = 0; s < 6; ++s)
    for (int x = 0; x < 3; ++x) {
      CHECK(a.reward(s, x) == b.reward(s, x));
      for (int n = 0; n < 6; ++n) CHECK(a.p(s, x, n) == b.p(s, x, n));
    }

  const TabularMdp dense = random_tabular(7, 2, 1.0, 3);
  for (int s = 0; s < 7; ++s)
    for (int x = 0; x < 2; ++x)
      for (int n = 0; n < 7; ++n) CHECK(dense.p(s, x, n) > 0.0);

  const TabularMdp single = random_tabular(1, 4, 0.5, 9);
  for (int x = 0; x < 4; ++x) CHECK(single.p(0, x, 0) == 1.0);

  const TabularMdp other = random_tabular(6, 3, 0.4, 18);
  bool differs = false;
  for (int s = 0; s < 6; ++s) differs |= other.reward(s, 0) != a.reward(s, 0);
  CHECK(differs);
}

TEST_CASE("chain and grid are valid and rewarded at the far end") {
  const TabularMdp chain = build_chain({});
  CHECK_NOTHROW(chain.validate());
  CHECK(chain.p(0, 1, 1) == doctest::Approx(0.9));
  CHECK(chain.p(0, 1, 0) == doctest::Approx(0.1));
  CHECK(chain.p(0, 0, 0) == doctest::Approx(1.0));
  CHECK(chain.reward(4, 0) == 1.0);
  const OptimalSolution opt = optimal_policy(chain);
  for (int s = 0; s < 4; ++s) CHECK(opt.policy.greedy_action(s) == 1);

  const TabularMdp grid = build_grid({});
  CHECK_NOTHROW(grid.validate());
  CHECK(grid.reward(15, 2) == 1.0);
  CHECK(grid.p(0, 2, 0) == doctest::Approx(0.9 + 0.1 * 2 / 4.0));
}

TEST_CASE("point mass dynamics") {
  PointMassSpec spec;
  spec.noise = 0.0;
  const PointMass pm(spec);
  Rng rng(1);

  Vec at_goal(4);
  at_goal << spec.goal_x, spec.goal_y, 0.0, 0.0;
  const StepResult rest = pm.step(at_goal, Vec::Zero(2), rng, 0);
  CHECK(rest.reward == 1.0);
  CHECK((rest.next_state - at_goal).norm() == 0.0);

  Vec moving(4);
  moving << 0.0, 0.0, 1.0, 0.0;
  const StepResult euler = pm.step(moving, Vec::Zero(2), rng, 0);
  CHECK(euler.next_state[0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(euler.next_state[1] == 0.0);
  CHECK(euler.next_state[2] == doctest::Approx(1.0 - 0.05 * spec.drag));

  // pushing past the crash speed lands in the absorbing pit
  Vec fast(4);
  fast << 0.0, 0.0, 0.99, 0.0;
  Vec push(2);
  push << 1.0, 0.0;
  const StepResult crash = pm.step(fast, push, rng, 0);
  CHECK(pm.in_pit(crash.next_state));
  const StepResult stuck = pm.step(crash.next_state, push, rng, 0);
  CHECK(stuck.reward == spec.cliff_reward);
  CHECK((stuck.next_state - crash.next_state).norm() == 0.0);

  Vec big(2);
  big << 3.0, -7.0;
  CHECK(pm.clip_action(big) == Vec((Vec(2) << 1.0, -1.0).finished()));
}

TEST_CASE("pendulum dynamics") {
  PendulumSpec spec;
  const Pendulum p(spec);
  Rng rng(1);
  const StepResult up = p.step(Vec::Zero(2), Vec::Zero(1), rng, 0);
  CHECK(up.reward == 0.0);
  CHECK(up.next_state.norm() == 0.0);

  Vec s(2);
  s << 0.5, 1.0;
  Vec u(1);
  u << 1.0;
  const StepResult one = p.step(s, u, rng, 0);
  CHECK(one.next_state[0] == doctest::Approx(0.5 + 0.05 * 1.0));
  CHECK(one.next_state[1] == doctest::Approx(1.0 + 0.05 * (10.0 * std::sin(0.5) + 1.0)));
  CHECK(one.reward == doctest::Approx(-(0.25 + 0.1 + 0.001)));

  Vec start = p.reset(rng, 0);
  CHECK(std::abs(std::abs(start[0]) - std::numbers::pi) < 0.5);
}

TEST_CASE("rewards stay within r_max on random steps") {
  PointMass pm;
  Pendulum pend;
  for (const ContinuousTask* task : {static_cast<const ContinuousTask*>(&pm),
                                     static_cast<const ContinuousTask*>(&pend)}) {
    Rng rng(Rng::hash(task->id()));
    UniformPolicy wild(Vec::Constant(task->action_dim(), -5.0),
                       Vec::Constant(task->action_dim(), 5.0));
    double worst = 0.0;
    Vec s = task->reset(rng, 0);
    for (int i = 0; i < 500000; ++i) {
      if (i % 200 == 0) s = task->reset(rng, 0);
      const StepResult step = task->step(s, wild.act(s, rng), rng, 0);
      worst = std::max(worst, std::abs(step.reward));
      s = step.next_state;
    }
    CHECK(worst <= task->r_max());
  }

  const TabularMdp chain = build_chain({});
  const TabularEnv env(chain);
  Rng rng(4);
  Vec s = env.reset(rng, 0);
  for (int i = 0; i < 10000; ++i) {
    const StepResult step = env.step(s, index_vector(static_cast<int>(rng.below(2))), rng, 0);
    CHECK(std::abs(step.reward) <= chain.r_max());
    s = step.next_state;
  }
}

TEST_CASE("behavior policies") {
  PointMass pm;
  CHECK_THROWS_AS(pm.behavior_policy("expert"), std::invalid_argument);
  // the tracker reaches the goal neighbourhood without crashing
  const auto partial = pm.behavior_policy("partial");
  const MonteCarloEstimate tracked = monte_carlo_value(pm, *partial, 50, 3);
  const auto random = pm.behavior_policy("random");
  const MonteCarloEstimate wandering = monte_carlo_value(pm, *random, 50, 3);
  CHECK(tracked.mean > wandering.mean);
  Rng rng(11);
  const Trajectory t = rollout(pm, *partial, rng, pm.horizon());
  CHECK(std::hypot(t.states.back()[0] - 1.0, t.states.back()[1]) < 0.2);
  for (const Vec& s : t.states) CHECK_FALSE(pm.in_pit(s));

  Pendulum pend;
  const auto swing = pend.behavior_policy("partial");
  const auto flail = pend.behavior_policy("random");
  CHECK(monte_carlo_value(pend, *swing, 20, 5).mean > monte_carlo_value(pend, *flail, 20, 5).mean);
}

#include "doctest.h"

#include <cmath>

#include "morel/pmdp.hpp"
#include "test_support.hpp"

using namespace morel;

namespace {

// True MDP whose rows are count / m, so the count model reproduces it
// exactly on visited pairs. Pairs are left unvisited with probability `skip`.
struct Counted {
  TabularMdp truth;
  TabularCountModel model;
};

Counted counted_mdp(Rng& rng, int S, int A, double gamma, double skip, int m = 16) {
  Counted c{testing::random_mdp(rng, S, A, gamma), TabularCountModel(S, A)};
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      std::vector<double> row(S, 0.0);
      for (int i = 0; i < m; ++i) row[rng.below(S)] += 1.0;
      const bool visit = rng.uniform() >= skip;
      for (int n = 0; n < S; ++n) {
        if (visit) {
          for (int k = 0; k < static_cast<int>(row[n]); ++k) c.model.add(s, a, n, c.truth.reward(s, a));
        }
        row[n] /= m;
      }
      c.truth.set_transition(s, a, row);
    }
  }
  return c;
}

PairSet unvisited(const TabularCountModel& model) {
  PairSet u(model.n_states(), model.n_actions());
  for (int s = 0; s < model.n_states(); ++s) {
    for (int a = 0; a < model.n_actions(); ++a) {
      if (!model.visited(s, a)) u.insert(s, a);
    }
  }
  return u;
}

}  // namespace

TEST_CASE("tabular P-MDP structure") {
  Rng rng(1);
  const Counted c = counted_mdp(rng, 5, 3, 0.9, 0.3);
  const PairSet u = unvisited(c.model);
  REQUIRE_FALSE(u.empty());
  const PessimisticTabular p =
      build_tabular_pmdp(c.model, u, reward_table(c.truth), 2.0, c.truth.rho0(), 0.9, 1.0);
  CHECK(p.mdp.n_states() == 6);
  CHECK(p.halt == 5);
  CHECK_NOTHROW(p.mdp.validate());
  for (int s = 0; s < 5; ++s) {
    for (int a = 0; a < 3; ++a) {
      CHECK(p.mdp.reward(s, a) == c.truth.reward(s, a));
      if (u.contains(s, a)) {
        CHECK(p.mdp.p(s, a, 5) == 1.0);
      } else {
        CHECK(p.mdp.p(s, a, 5) == 0.0);
        for (int n = 0; n < 5; ++n) CHECK(p.mdp.p(s, a, n) == doctest::Approx(c.truth.p(s, a, n)));
      }
    }
  }
  for (int a = 0; a < 3; ++a) {
    CHECK(p.mdp.p(5, a, 5) == 1.0);
    CHECK(p.mdp.reward(5, a) == -2.0);
  }
  CHECK(p.mdp.rho0()[5] == 0.0);

  CHECK_THROWS_AS(build_tabular_pmdp(c.model, u, reward_table(c.truth), -0.1, c.truth.rho0(), 0.9, 1.0),
                  std::invalid_argument);
  const PairSet none(5, 3);
  CHECK_THROWS_AS(build_tabular_pmdp(c.model, none, reward_table(c.truth), 1.0, c.truth.rho0(), 0.9, 1.0),
                  std::invalid_argument);
}

TEST_CASE("fully known P-MDP with exact model reproduces true values") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Counted c = counted_mdp(rng, 6, 3, 0.9, 0.0);
    const PessimisticTabular p = build_tabular_pmdp(c.model, PairSet(6, 3), reward_table(c.truth),
                                                    1.0, c.truth.rho0(), 0.9, 1.0);
    const TabularPolicy pi = testing::random_policy(rng, 6, 3);
    CHECK(exact_policy_value(p.mdp, pi.extended(7)).J ==
          doctest::Approx(exact_policy_value(c.truth, pi).J).epsilon(1e-10));
  }
}

TEST_CASE("HALT value is the discounted penalty") {
  Rng rng(3);
  const Counted c = counted_mdp(rng, 3, 2, 0.9, 0.5);
  const double r_max = 1.0;
  const PessimisticTabular p = build_tabular_pmdp(c.model, unvisited(c.model), reward_table(c.truth),
                                                  r_max, c.truth.rho0(), 0.9, r_max);
  const PolicyValue v = exact_policy_value(p.mdp, TabularPolicy::uniform(4, 2));
  CHECK(v.values[p.halt] == doctest::Approx(-10.0 * r_max));
}

TEST_CASE("halt_reward and default_kappa") {
  CHECK(halt_reward(HaltMode::single_penalty, 0.3, 1.0, 0.5) == -1.0);
  // r + gamma * (-kappa) / (1 - gamma): one step of reward, then HALT forever
  CHECK(halt_reward(HaltMode::exact_sum, 0.0, 1.0, 0.5) == doctest::Approx(-1.0));
  CHECK(halt_reward(HaltMode::exact_sum, 0.25, 2.0, 0.9) == doctest::Approx(0.25 - 18.0));
  CHECK(parse_halt_mode("exact-sum") == HaltMode::exact_sum);
  CHECK(to_string(parse_halt_mode("single-penalty")) == "single-penalty");
  CHECK_THROWS_AS(parse_halt_mode("soft"), std::invalid_argument);
  CHECK(parse_member_mode("average") == MemberMode::average);

  OfflineDataset d;
  for (double r : {0.5, -2.0, 1.0}) {
    Transition tr;
    tr.r = r;
    d.transitions.push_back(tr);
  }
  CHECK(default_kappa(d, 50.0) == 52.0);  // penalty reward -52
  CHECK(-default_kappa(d, 0.0) == d.r_min());
  d.transitions[1].r = 5.0;
  CHECK(default_kappa(d, 0.0) == 0.0);
  CHECK_THROWS_AS(default_kappa(OfflineDataset{}, 1.0), std::invalid_argument);
}

TEST_CASE("exact-sum truncated returns match the augmented MDP on matched trajectories") {
  Rng rng(4);
  int truncated = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const double gamma = 0.9;
    const Counted c = counted_mdp(rng, 6, 3, gamma, 0.25);
    const PessimisticTabular p = build_tabular_pmdp(c.model, unvisited(c.model), reward_table(c.truth),
                                                    1.5, c.truth.rho0(), gamma, 1.0);
    const TabularPolicy pi = testing::random_policy(rng, 6, 3).extended(7);
    const TabularPessimisticRollout sim(p, HaltMode::exact_sum);
    const TabularEnv full(p.mdp);
    for (int ep = 0; ep < 20; ++ep) {
      Rng a = rng.split("ep").split(static_cast<std::uint64_t>(trial * 100 + ep));
      Rng b = a;
      const Trajectory cut = rollout(sim, pi, a, 700);
      const Trajectory whole = rollout(full, pi, b, 700);
      if (cut.terminated_by == Termination::halt) ++truncated;
      for (std::size_t t = 0; t + 1 < cut.length(); ++t) REQUIRE(cut.states[t] == whole.states[t]);
      CHECK(std::abs(cut.discounted_return(gamma) - whole.discounted_return(gamma)) < 1e-8);
    }

    const PolicyValue exact = exact_policy_value(p.mdp, pi);
    const MonteCarloEstimate mc = monte_carlo_value(sim, pi, 3000, 99 + trial, {.horizon = 400});
    CHECK(std::abs(mc.mean - exact.J) < 5.0 * mc.std_error + 1e-9);
  }
  CHECK(truncated > 50);
}

TEST_CASE("continuous pessimistic rollout") {
  PointMass task;
  Mat w0 = Mat::Zero(4, 6), w1 = Mat::Zero(4, 6);
  w0(0, 2) = 0.05;  // member 0 moves x by 0.05 vx
  w1(0, 2) = 0.05;
  w1(1, 0) = 1.0;   // member 1 also moves y by x, so disc = |x|
  const DynamicsEnsemble ens = testing::linear_ensemble({w0, w1}, 4, 2);
  Calibration cal;
  cal.threshold = 0.5;
  const UsadEnsemble usad(ens, cal);

  OfflineDataset d;
  Transition tr;
  tr.s = Vec::Zero(4);
  tr.a = Vec::Zero(2);
  tr.s_next = tr.s;
  d.transitions.push_back(tr);

  PessimisticRolloutConfig cfg;
  cfg.kappa = 3.0;
  const PessimisticRollout sim(task, usad, StartSampler(d), cfg);
  Rng rng(5);
  CHECK(sim.reset(rng, 0) == Vec::Zero(4));

  Vec s(4);
  s << 0.5, 0.0, 0.2, 0.0;  // disc = 0.5: known (inclusive)
  const Vec a = (Vec(2) << 0.3, -0.1).finished();
  const StepResult k0 = sim.step(s, a, rng, 0);
  const StepResult k1 = sim.step(s, a, rng, 1);
  CHECK_FALSE(k0.halted);
  CHECK(k0.reward == task.reward(s, a));
  CHECK(k0.next_state[0] == doctest::Approx(0.51));
  CHECK(k0.next_state[1] == doctest::Approx(0.0));
  CHECK(k1.next_state[1] == doctest::Approx(0.5));

  PessimisticRolloutConfig avg = cfg;
  avg.member_mode = MemberMode::average;
  const PessimisticRollout sim_avg(task, usad, StartSampler(d), avg);
  CHECK(sim_avg.step(s, a, rng, 0).next_state[1] == doctest::Approx(0.25));

  s[0] = 0.6;
  const StepResult u = sim.step(s, a, rng, 0);
  CHECK(u.halted);
  CHECK(u.done);
  CHECK(u.reward == doctest::Approx(task.reward(s, a) - 0.95 * 3.0 / 0.05));
  PessimisticRolloutConfig single = cfg;
  single.halt_mode = HaltMode::single_penalty;
  CHECK(PessimisticRollout(task, usad, StartSampler(d), single).step(s, a, rng, 0).reward == -3.0);

  // no detector: the same pair is simulated
  const UsadEnsemble off = UsadEnsemble::disabled(ens);
  const PessimisticRollout naive(task, off, StartSampler(d), cfg);
  CHECK_FALSE(naive.step(s, a, rng, 0).halted);

  // non-finite predictions truncate and are counted
  s[2] = std::numeric_limits<double>::infinity();
  CHECK(naive.step(s, a, rng, 0).halted);
  CHECK(naive.nonfinite_steps() == 1);
}

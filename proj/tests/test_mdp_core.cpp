#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "morel/simulation.hpp"
#include "morel/tabular.hpp"
#include "test_support.hpp"

using namespace morel;

namespace {

TabularMdp single_state(double reward, double gamma) {
  TabularMdp mdp(1, 1, gamma, std::max(1.0, std::abs(reward)));
  mdp.set_transition(0, 0, 0);
  mdp.set_reward(0, 0, reward);
  mdp.set_rho0({1.0});
  return mdp;
}

// s0 -> s1 -> s1, reward 0 at s0 and 1 at s1.
TabularMdp two_state_chain(double gamma) {
  TabularMdp mdp(2, 1, gamma, 1.0);
  mdp.set_transition(0, 0, 1);
  mdp.set_transition(1, 0, 1);
  mdp.set_reward(1, 0, 1.0);
  mdp.set_rho0({1.0, 0.0});
  return mdp;
}

class ConstantRewardEnv : public Environment {
 public:
  ConstantRewardEnv(double reward, double gamma, int done_at = -1, bool noisy = false)
      : reward_(reward), gamma_(gamma), done_at_(done_at), noisy_(noisy) {}
  std::string id() const override { return "constant"; }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int horizon() const override { return 100000; }
  double gamma() const override { return gamma_; }
  double r_max() const override { return 1.0; }
  Vec reset(Rng&, std::size_t) const override { return Vec::Zero(1); }
  StepResult step(const Vec& s, const Vec&, Rng& rng, std::size_t) const override {
    StepResult out;
    out.next_state = s.array() + 1.0;
    out.reward = noisy_ ? reward_ * rng.uniform() : reward_;
    out.done = done_at_ > 0 && out.next_state[0] >= done_at_;
    return out;
  }

 private:
  double reward_, gamma_;
  int done_at_;
  bool noisy_;
};

class NanEnv : public ConstantRewardEnv {
 public:
  NanEnv() : ConstantRewardEnv(0.0, 0.9) {}
  StepResult step(const Vec& s, const Vec& a, Rng& rng, std::size_t e) const override {
    StepResult out = ConstantRewardEnv::step(s, a, rng, e);
    if (s[0] >= 4) out.reward = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
};

class ZeroPolicy : public Policy {
 public:
  Vec act(const Vec&, Rng&) const override { return Vec::Zero(1); }
  Vec mean_action(const Vec&) const override { return Vec::Zero(1); }
};

}  // namespace

TEST_CASE("exact_policy_value on hand-computed instances") {
  CHECK(exact_policy_value(single_state(1.0, 0.9), TabularPolicy::uniform(1, 1)).J ==
        doctest::Approx(10.0).epsilon(1e-12));

  Rng rng(7);
  TabularMdp zero = testing::random_mdp(rng, 5, 3, 0.95);
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 3; ++a) zero.set_reward(s, a, 0.0);
  CHECK(exact_policy_value(zero, TabularPolicy::uniform(5, 3)).J == 0.0);

  CHECK(exact_policy_value(two_state_chain(0.5), TabularPolicy::uniform(2, 1)).J ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact_policy_value rejects mismatched policies") {
  CHECK_THROWS_AS(exact_policy_value(two_state_chain(0.5), TabularPolicy::uniform(3, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(discounted_visitation(two_state_chain(0.5), TabularPolicy::uniform(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("discounted_visitation on hand-computed instances") {
  const Mat single = discounted_visitation(single_state(0.3, 0.9), TabularPolicy::uniform(1, 1));
  CHECK(single(0, 0) == doctest::Approx(1.0));

  // symmetric two-state MDP: each action swaps or stays with equal mass
  TabularMdp sym(2, 2, 0.8, 1.0);
  for (int s = 0; s < 2; ++s) {
    sym.set_transition(s, 0, s);
    sym.set_transition(s, 1, 1 - s);
  }
  sym.set_rho0({0.5, 0.5});
  const Mat d = discounted_visitation(sym, TabularPolicy::uniform(2, 2));
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) CHECK(d(s, a) == doctest::Approx(0.25).epsilon(1e-12));

  const Mat chain = discounted_visitation(two_state_chain(0.5), TabularPolicy::uniform(2, 1));
  CHECK(chain(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(chain(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("expected_discounted_hitting on hand-computed instances") {
  const TabularMdp chain = two_state_chain(0.5);
  const TabularPolicy pi = TabularPolicy::uniform(2, 1);
  CHECK(expected_discounted_hitting(chain, pi, PairSet(2, 1)) == 0.0);

  PairSet start(2, 1);
  start.insert(0, 0);
  CHECK(expected_discounted_hitting(chain, pi, start) == doctest::Approx(1.0));

  // s0 -> s1 -> s2; target first reachable at t = 2
  TabularMdp three(3, 1, 0.5, 1.0);
  three.set_transition(0, 0, 1);
  three.set_transition(1, 0, 2);
  three.set_transition(2, 0, 2);
  three.set_rho0({1.0, 0.0, 0.0});
  PairSet target(3, 1);
  target.insert(2, 0);
  CHECK(expected_discounted_hitting(three, TabularPolicy::uniform(3, 1), target) ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("random MDPs: exact evaluation matches fixed-point iteration and flow duality") {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int S = 1 + static_cast<int>(rng.below(8));
    const int A = 1 + static_cast<int>(rng.below(4));
    const double gamma = rng.uniform(0.0, 0.95);
    const TabularMdp mdp = testing::random_mdp(rng, S, A, gamma);
    const TabularPolicy pi = testing::random_policy(rng, S, A);

    const PolicyValue exact = exact_policy_value(mdp, pi);
    const auto fixed_point = testing::iterate_value(mdp, pi, 2000);
    for (int s = 0; s < S; ++s) CHECK(std::abs(exact.values[s] - fixed_point[s]) < 1e-8);

    const Mat d = discounted_visitation(mdp, pi);
    const auto brute = testing::propagate_visitation(mdp, pi, 2000);
    double total = 0.0, flow_value = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        CHECK(d(s, a) >= 0.0);
        CHECK(std::abs(d(s, a) - brute[s * A + a]) < 1e-10);
        total += d(s, a);
        flow_value += d(s, a) * mdp.reward(s, a);
      }
    }
    CHECK(std::abs(total - 1.0) < 1e-10);
    CHECK(std::abs(flow_value / (1.0 - gamma) - exact.J) < 1e-8);

    PairSet target(S, A);
    double target_mass = 0.0;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        if (rng.uniform() < 0.3) {
          target.insert(s, a);
          target_mass += d(s, a);
        }
    const double hit = expected_discounted_hitting(mdp, pi, target);
    CHECK(std::abs(hit - testing::propagate_hitting(mdp, pi, target, 2000)) < 1e-10);
    CHECK(hit <= target_mass / (1.0 - gamma) + 1e-10);
  }
}

TEST_CASE("optimal_policy dominates every deterministic policy") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const TabularMdp mdp = testing::random_mdp(rng, 3, 2, 0.9);
    const OptimalSolution opt = optimal_policy(mdp);
    for (int code = 0; code < 8; ++code) {
      std::vector<int> acts = {code & 1, (code >> 1) & 1, (code >> 2) & 1};
      const PolicyValue v = exact_policy_value(mdp, TabularPolicy::deterministic(acts, 2));
      for (int s = 0; s < 3; ++s) CHECK(v.values[s] <= opt.values[s] + 1e-10);
    }
  }
}

TEST_CASE("monte_carlo_value basics") {
  const ZeroPolicy pi;
  const MonteCarloEstimate one = monte_carlo_value(ConstantRewardEnv(1.0, 0.9), pi, 5, 1);
  CHECK(one.mean == doctest::Approx(10.0).epsilon(1e-5));
  CHECK(one.std_error == 0.0);
  CHECK(monte_carlo_value(ConstantRewardEnv(0.0, 0.9), pi, 5, 1).mean == 0.0);
  CHECK(one.horizon == analytic_horizon(0.9, 1.0));
  CHECK(std::pow(0.9, one.horizon) * 1.0 / 0.1 < 1e-6);
  CHECK(std::pow(0.9, one.horizon - 1) * 1.0 / 0.1 >= 1e-6);

  const MonteCarloEstimate a = monte_carlo_value(ConstantRewardEnv(1.0, 0.9, -1, true), pi, 20, 3);
  const MonteCarloEstimate b = monte_carlo_value(ConstantRewardEnv(1.0, 0.9, -1, true), pi, 20, 3);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error > 0.0);

  CHECK_THROWS_WITH_AS(monte_carlo_value(NanEnv(), pi, 2, 0), "non-finite reward from environment at trajectory 0, step 4",
                       std::runtime_error);
  CHECK_THROWS_AS(monte_carlo_value(ConstantRewardEnv(1.0, 0.9), pi, 0, 0), std::invalid_argument);
}

TEST_CASE("monte_carlo_value converges to the exact value on wrapped tabular MDPs") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const TabularMdp mdp = testing::random_mdp(rng, 4, 2, 0.8);
    const TabularPolicy pi = testing::random_policy(rng, 4, 2);
    const MonteCarloEstimate est = monte_carlo_value(TabularEnv(mdp), pi, 4000, 10 + trial);
    const double exact = exact_policy_value(mdp, pi).J;
    CHECK(std::abs(est.mean - exact) < 3.0 * est.std_error);
  }
}

TEST_CASE("rollout contract") {
  const ZeroPolicy pi;
  Rng rng(1);
  const Trajectory empty = rollout(ConstantRewardEnv(1.0, 0.9), pi, rng, 0);
  CHECK(empty.states.size() == 1);
  CHECK(empty.actions.empty());
  CHECK(empty.terminated_by == Termination::horizon);

  const TabularMdp mdp = [] {
    Rng r(3);
    return testing::random_mdp(r, 5, 2, 0.9);
  }();
  const TabularPolicy det = TabularPolicy::deterministic({0, 1, 0, 1, 1}, 2);
  Rng r1(42), r2(42);
  const Trajectory t1 = rollout(TabularEnv(mdp), det, r1, 30);
  const Trajectory t2 = rollout(TabularEnv(mdp), det, r2, 30);
  CHECK(t1.rewards == t2.rewards);
  for (std::size_t i = 0; i < t1.states.size(); ++i) CHECK(t1.states[i] == t2.states[i]);

  Rng r3(0);
  const Trajectory done = rollout(ConstantRewardEnv(1.0, 0.9, 3), pi, r3, 50);
  CHECK(done.length() == 3);
  CHECK(done.states.size() == 4);
  CHECK(done.terminated_by == Termination::env_done);
}

TEST_CASE("TabularMdp validation") {
  TabularMdp mdp(2, 1, 0.9, 1.0);
  mdp.set_transition(0, 0, 1);
  mdp.set_transition(1, 0, 1);
  mdp.set_rho0({1.0, 0.0});
  CHECK_NOTHROW(mdp.validate());
  mdp.set_reward(0, 0, 1.5);
  CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  mdp.set_reward(0, 0, 0.0);
  const std::vector<double> bad = {0.7, 0.2};
  mdp.set_transition(0, 0, bad);
  CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
  CHECK_THROWS_AS(TabularMdp(2, 1, 1.0, 1.0), std::invalid_argument);
}

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "morel/simulation.hpp"
#include "morel/tabular.hpp"

namespace morel {

// ---------------------------------------------------------------------------
// Lower-bound counterexample

struct CounterexampleSpec {
  double gamma = 0.95;
  double epsilon = 0.01;
  double r_max = 1.0;

  /// Throws std::invalid_argument unless gamma in [0.95, 1) and
  /// epsilon in (0, (1 - gamma) / log(1 / (1 - gamma))].
  void validate() const;
  /// Chain length, ceil(10 log(1 / (1 - gamma))).
  int k() const;
  /// Start mass on state 1, epsilon / ((1 - gamma) log(1 / (1 - gamma))).
  double p0() const;
  /// r_max / (4 (1 - gamma)^2) * epsilon / log(1 / (1 - gamma)).
  double lower_bound_value() const;
};

/// States are indexed 0..k (drawn as 1..k+1), actions 0..2 (a1..a3).
struct Counterexample {
  CounterexampleSpec spec;
  int k = 0;
  double p0 = 0.0;
  TabularMdp mdp;
  TabularPolicy optimal;
  TabularPolicy behavior;
};

Counterexample build_counterexample(const CounterexampleSpec& spec);

// ---------------------------------------------------------------------------
// Tabular families

/// Random rows: each next state is in the support with probability
/// `sparsity` (at least one always is), weights are Exp(1) normalized.
/// Rewards uniform in [-r_max, r_max]; rho0 dense random.
TabularMdp random_tabular(int n_states, int n_actions, double sparsity, std::uint64_t seed,
                          double gamma = 0.9, double r_max = 1.0);

struct ChainSpec {
  int n_states = 5;
  /// Probability that a move succeeds; otherwise the agent stays put.
  double p_success = 0.9;
  double gamma = 0.9;
  double r_max = 1.0;
};

/// Action 0 moves left, action 1 moves right. Reward r_max for any action
/// taken in the last state, 0 elsewhere. Starts in state 0.
TabularMdp build_chain(const ChainSpec& spec);

struct GridSpec {
  int width = 4;
  int height = 4;
  /// Probability that the chosen move is replaced by a uniform random one.
  double slip = 0.1;
  double gamma = 0.95;
  double r_max = 1.0;
};

/// Actions up/down/left/right; moves off the grid leave the agent in place.
/// State index = y * width + x. Start (0, 0), reward r_max in the far corner.
TabularMdp build_grid(const GridSpec& spec);

// ---------------------------------------------------------------------------
// Continuous tasks

/// Continuous environment with a known reward function.
class ContinuousTask : public Environment {
 public:
  /// Reward for taking the (already clipped) action `a` in `s`.
  virtual double reward(const Vec& s, const Vec& a) const = 0;
  /// Names accepted by behavior_policy.
  virtual std::vector<std::string> behavior_names() const = 0;
  virtual std::unique_ptr<Policy> behavior_policy(std::string_view name) const = 0;
};

/// 2-D point mass. State (px, py, vx, vy), action (ax, ay) in [-1, 1]^2.
///
///   p' = p + dt v
///   v' = v + dt (force a - drag v) + noise N(0, I)
///
/// If |v'| exceeds crash_speed the mass leaves the track and lands at rest
/// in the pit. The pit is absorbing and pays cliff_reward every step.
/// Elsewhere the reward is
///
///   min(1, (1 - min(|goal - p|, 1)) + 0.5 clip(v . u / velocity_scale, -1, 1))
///
/// with u the unit vector toward the goal, so it peaks at 1 when resting at
/// the goal. Start: p ~ N(0, start_noise^2 I), v = 0.
struct PointMassSpec {
  int horizon = 100;
  double gamma = 0.95;
  double dt = 0.05;
  double force = 2.0;
  double drag = 1.0;
  double noise = 0.01;
  double start_noise = 0.02;
  double goal_x = 1.0;
  double goal_y = 0.0;
  double crash_speed = 1.0;
  double velocity_scale = 2.0;
  double pit_x = 0.5;
  double pit_y = -1.5;
  double pit_radius = 0.25;
  double cliff_reward = -10.0;
};

class PointMass : public ContinuousTask {
 public:
  explicit PointMass(PointMassSpec spec = {});

  const PointMassSpec& spec() const { return spec_; }
  bool in_pit(const Vec& s) const;

  std::string id() const override { return "point-mass"; }
  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int horizon() const override { return spec_.horizon; }
  double gamma() const override { return spec_.gamma; }
  double r_max() const override;
  Vec reset(Rng& rng, std::size_t episode) const override;
  Vec clip_action(const Vec& action) const override;
  StepResult step(const Vec& state, const Vec& action, Rng& rng,
                  std::size_t episode) const override;
  double reward(const Vec& s, const Vec& a) const override;
  std::vector<std::string> behavior_names() const override { return {"partial", "random"}; }
  std::unique_ptr<Policy> behavior_policy(std::string_view name) const override;

 private:
  PointMassSpec spec_;
};

/// Torque-limited pendulum, angle measured from upright. State (theta,
/// theta_dot), action u in [-max_torque, max_torque].
///
///   theta_dot' = clip(theta_dot + dt (g / l sin(theta) + u / (m l^2)), +-max_speed)
///   theta'     = wrap(theta + dt theta_dot)
///
/// plus optional N(0, noise^2) on theta_dot'. Reward
/// -(theta^2 + 0.1 theta_dot^2 + 0.001 u^2). Starts hanging down.
struct PendulumSpec {
  int horizon = 200;
  double gamma = 0.99;
  double dt = 0.05;
  double g = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double max_torque = 2.0;
  double max_speed = 8.0;
  double noise = 0.0;
  double start_noise = 0.05;
};

class Pendulum : public ContinuousTask {
 public:
  explicit Pendulum(PendulumSpec spec = {});

  const PendulumSpec& spec() const { return spec_; }

  std::string id() const override { return "pendulum"; }
  int state_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  int horizon() const override { return spec_.horizon; }
  double gamma() const override { return spec_.gamma; }
  double r_max() const override;
  Vec reset(Rng& rng, std::size_t episode) const override;
  Vec clip_action(const Vec& action) const override;
  StepResult step(const Vec& state, const Vec& action, Rng& rng,
                  std::size_t episode) const override;
  double reward(const Vec& s, const Vec& a) const override;
  std::vector<std::string> behavior_names() const override { return {"partial", "random"}; }
  std::unique_ptr<Policy> behavior_policy(std::string_view name) const override;

 private:
  PendulumSpec spec_;
};

struct ContinuousTaskSpec {
  std::string kind = "point-mass";  // or "pendulum"
  PointMassSpec point_mass;
  PendulumSpec pendulum;
};

std::unique_ptr<ContinuousTask> build_continuous_task(const ContinuousTaskSpec& spec);

/// Uniform random actions on a box.
class UniformPolicy : public Policy {
 public:
  UniformPolicy(Vec low, Vec high) : low_(std::move(low)), high_(std::move(high)) {}
  Vec act(const Vec& state, Rng& rng) const override;
  Vec mean_action(const Vec& state) const override;

 private:
  Vec low_, high_;
};

}  // namespace morel

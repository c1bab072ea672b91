#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "morel/rng.hpp"

namespace morel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct StepResult {
  Vec next_state;
  double reward = 0.0;
  bool done = false;
  /// Set when the step entered the absorbing HALT state of a pessimistic MDP.
  bool halted = false;
};

/// Simulatable environment. `step` must be a pure function of its arguments
/// and the position of `rng`; implementations hold no mutable state.
///
/// `episode` identifies the rollout a step belongs to. Plain environments
/// ignore it; model-based simulators use it to pick a per-rollout hypothesis.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  /// Episode length cap.
  virtual int horizon() const = 0;
  virtual double gamma() const = 0;
  virtual double r_max() const = 0;

  virtual Vec reset(Rng& rng, std::size_t episode) const = 0;
  /// Projects a proposed action onto the action space. Datasets record the
  /// projected action.
  virtual Vec clip_action(const Vec& action) const { return action; }
  virtual StepResult step(const Vec& state, const Vec& action, Rng& rng,
                          std::size_t episode) const = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Vec act(const Vec& state, Rng& rng) const = 0;
  /// Most likely action; used for deterministic evaluation.
  virtual Vec mean_action(const Vec& state) const = 0;
};

enum class Termination { horizon, env_done, halt };

std::string to_string(Termination t);

struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> actions;
  std::vector<double> rewards;
  Termination terminated_by = Termination::horizon;

  std::size_t length() const { return actions.size(); }
  double discounted_return(double gamma) const;
  double undiscounted_return() const;
};

/// Runs one episode of at most `horizon` steps.
Trajectory rollout(const Environment& env, const Policy& policy, Rng& rng, int horizon,
                   std::size_t episode = 0, bool mean_actions = false);

/// Smallest H with gamma^H * r_max / (1 - gamma) < tail.
int analytic_horizon(double gamma, double r_max, double tail = 1e-6);

struct MonteCarloOptions {
  /// 0 means min(env.horizon(), analytic_horizon(...)).
  int horizon = 0;
  bool mean_actions = false;
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double undiscounted_mean = 0.0;
  double undiscounted_stderr = 0.0;
  double frac_halted = 0.0;
  int n_traj = 0;
  int horizon = 0;
};

/// Average discounted return over `n_traj` rollouts. Trajectory i draws from
/// Rng(seed).split("mc").split(i), so results do not depend on evaluation
/// order. Throws if the environment emits a non-finite state or reward.
MonteCarloEstimate monte_carlo_value(const Environment& env, const Policy& policy, int n_traj,
                                     std::uint64_t seed, const MonteCarloOptions& options = {});

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};
MeanStderr mean_and_stderr(const std::vector<double>& xs);

}  // namespace morel

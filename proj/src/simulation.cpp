#include "morel/simulation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace morel {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::horizon: return "horizon";
    case Termination::env_done: return "env-done";
    case Termination::halt: return "halt";
  }
  return "unknown";
}

double Trajectory::discounted_return(double gamma) const {
  double ret = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    ret += discount * r;
    discount *= gamma;
  }
  return ret;
}

double Trajectory::undiscounted_return() const {
  double ret = 0.0;
  for (double r : rewards) ret += r;
  return ret;
}

Trajectory rollout(const Environment& env, const Policy& policy, Rng& rng, int horizon,
                   std::size_t episode, bool mean_actions) {
  Trajectory traj;
  traj.states.push_back(env.reset(rng, episode));
  for (int t = 0; t < horizon; ++t) {
    const Vec& s = traj.states.back();
    Vec a = env.clip_action(mean_actions ? policy.mean_action(s) : policy.act(s, rng));
    StepResult step = env.step(s, a, rng, episode);
    traj.actions.push_back(std::move(a));
    traj.rewards.push_back(step.reward);
    traj.states.push_back(std::move(step.next_state));
    if (step.halted) {
      traj.terminated_by = Termination::halt;
      return traj;
    }
    if (step.done) {
      traj.terminated_by = Termination::env_done;
      return traj;
    }
  }
  traj.terminated_by = Termination::horizon;
  return traj;
}

int analytic_horizon(double gamma, double r_max, double tail) {
  if (gamma <= 0.0) return 1;
  const double bound = tail * (1.0 - gamma) / r_max;
  if (bound >= 1.0) return 1;
  int h = static_cast<int>(std::floor(std::log(bound) / std::log(gamma))) + 1;
  while (h > 1 && std::pow(gamma, h - 1) * r_max / (1.0 - gamma) < tail) --h;
  while (std::pow(gamma, h) * r_max / (1.0 - gamma) >= tail) ++h;
  return h;
}

MeanStderr mean_and_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= n;
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.std_error = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

namespace {

void check_finite(const Trajectory& traj, int index) {
  for (std::size_t t = 0; t < traj.length(); ++t) {
    const bool bad_state = !traj.states[t + 1].allFinite();
    const bool bad_reward = !std::isfinite(traj.rewards[t]);
    if (bad_state || bad_reward) {
      std::ostringstream msg;
      msg << "non-finite " << (bad_state ? "state" : "reward") << " from environment at trajectory "
          << index << ", step " << t;
      throw std::runtime_error(msg.str());
    }
  }
}

}  // namespace

MonteCarloEstimate monte_carlo_value(const Environment& env, const Policy& policy, int n_traj,
                                     std::uint64_t seed, const MonteCarloOptions& options) {
  if (n_traj < 1) throw std::invalid_argument("monte_carlo_value: n_traj must be >= 1");
  const int horizon = options.horizon > 0
                          ? options.horizon
                          : std::min(env.horizon(), analytic_horizon(env.gamma(), env.r_max()));
  const Rng root = Rng(seed).split("mc");
  std::vector<double> discounted(n_traj), total(n_traj);
  int halted = 0;
  for (int i = 0; i < n_traj; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    Trajectory traj = rollout(env, policy, rng, horizon, static_cast<std::size_t>(i),
                              options.mean_actions);
    check_finite(traj, i);
    discounted[i] = traj.discounted_return(env.gamma());
    total[i] = traj.undiscounted_return();
    if (traj.terminated_by == Termination::halt) ++halted;
  }
  const MeanStderr d = mean_and_stderr(discounted);
  const MeanStderr u = mean_and_stderr(total);
  MonteCarloEstimate est;
  est.mean = d.mean;
  est.std_error = d.std_error;
  est.undiscounted_mean = u.mean;
  est.undiscounted_stderr = u.std_error;
  est.frac_halted = static_cast<double>(halted) / n_traj;
  est.n_traj = n_traj;
  est.horizon = horizon;
  return est;
}

}  // namespace morel

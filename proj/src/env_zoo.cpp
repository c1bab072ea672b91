#include "morel/env_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace morel {

// ---------------------------------------------------------------------------
// Counterexample

void CounterexampleSpec::validate() const {
  if (!(gamma >= 0.95 && gamma < 1.0)) {
    throw std::invalid_argument("counterexample: gamma must lie in [0.95, 1)");
  }
  const double upper = (1.0 - gamma) / std::log(1.0 / (1.0 - gamma));
  if (!(epsilon > 0.0 && epsilon <= upper)) {
    std::ostringstream msg;
    msg << "counterexample: epsilon must lie in (0, " << upper << "]";
    throw std::invalid_argument(msg.str());
  }
  if (!(r_max > 0.0)) throw std::invalid_argument("counterexample: r_max must be positive");
}

int CounterexampleSpec::k() const {
  return std::max(1, static_cast<int>(std::ceil(10.0 * std::log(1.0 / (1.0 - gamma)))));
}

double CounterexampleSpec::p0() const {
  return epsilon / ((1.0 - gamma) * std::log(1.0 / (1.0 - gamma)));
}

double CounterexampleSpec::lower_bound_value() const {
  return r_max / (4.0 * (1.0 - gamma) * (1.0 - gamma)) * epsilon / std::log(1.0 / (1.0 - gamma));
}

Counterexample build_counterexample(const CounterexampleSpec& spec) {
  spec.validate();
  Counterexample out;
  out.spec = spec;
  out.k = spec.k();
  out.p0 = spec.p0();
  const int k = out.k;
  const int n = k + 1;

  TabularMdp mdp(n, 3, spec.gamma, spec.r_max);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < 3; ++a) mdp.set_transition(s, a, s);
  }
  for (int s = 0; s < k; ++s) mdp.set_transition(s, 0, s + 1);
  mdp.set_reward(k, 0, spec.r_max);
  mdp.set_transition(1, 1, 0);  // a2 at state 2 goes back to state 1

  std::vector<double> rho0(n, 0.0);
  rho0[0] = out.p0;
  rho0[k] += 1.0 - out.p0;
  mdp.set_rho0(std::move(rho0));
  mdp.validate();

  std::vector<int> behavior(n, 0);
  behavior[1] = 1;
  out.optimal = TabularPolicy::deterministic(std::vector<int>(n, 0), 3);
  out.behavior = TabularPolicy::deterministic(behavior, 3);
  out.mdp = std::move(mdp);
  return out;
}

// ---------------------------------------------------------------------------
// Tabular families

TabularMdp random_tabular(int n_states, int n_actions, double sparsity, std::uint64_t seed,
                          double gamma, double r_max) {
  if (n_states < 1 || n_actions < 1) {
    throw std::invalid_argument("random_tabular: n_states and n_actions must be >= 1");
  }
  Rng rng = Rng(seed).split("random-tabular");
  TabularMdp mdp(n_states, n_actions, gamma, r_max);
  std::vector<double> row(n_states);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const auto forced = static_cast<int>(rng.below(n_states));
      double total = 0.0;
      for (int n = 0; n < n_states; ++n) {
        const bool on = n == forced || rng.uniform() < sparsity;
        row[n] = on ? rng.exponential() : 0.0;
        total += row[n];
      }
      for (double& x : row) x /= total;
      mdp.set_transition(s, a, row);
      mdp.set_reward(s, a, rng.uniform(-r_max, r_max));
    }
  }
  std::vector<double> rho0(n_states);
  double total = 0.0;
  for (double& x : rho0) total += (x = rng.exponential());
  for (double& x : rho0) x /= total;
  mdp.set_rho0(std::move(rho0));
  return mdp;
}

TabularMdp build_chain(const ChainSpec& spec) {
  if (spec.n_states < 2) throw std::invalid_argument("chain: n_states must be >= 2");
  if (!(spec.p_success >= 0.0 && spec.p_success <= 1.0)) {
    throw std::invalid_argument("chain: p_success must lie in [0, 1]");
  }
  const int n = spec.n_states;
  TabularMdp mdp(n, 2, spec.gamma, spec.r_max);
  std::vector<double> row(n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < 2; ++a) {
      std::fill(row.begin(), row.end(), 0.0);
      const int target = a == 0 ? std::max(0, s - 1) : std::min(n - 1, s + 1);
      row[target] += spec.p_success;
      row[s] += 1.0 - spec.p_success;
      mdp.set_transition(s, a, row);
    }
  }
  mdp.set_reward(n - 1, 0, spec.r_max);
  mdp.set_reward(n - 1, 1, spec.r_max);
  std::vector<double> rho0(n, 0.0);
  rho0[0] = 1.0;
  mdp.set_rho0(std::move(rho0));
  return mdp;
}

TabularMdp build_grid(const GridSpec& spec) {
  if (spec.width < 1 || spec.height < 1) throw std::invalid_argument("grid: empty grid");
  const int w = spec.width;
  const int h = spec.height;
  const int n = w * h;
  static constexpr int dx[4] = {0, 0, -1, 1};
  static constexpr int dy[4] = {1, -1, 0, 0};
  auto move = [&](int s, int a) {
    const int x = s % w + dx[a];
    const int y = s / w + dy[a];
    if (x < 0 || x >= w || y < 0 || y >= h) return s;
    return y * w + x;
  };
  TabularMdp mdp(n, 4, spec.gamma, spec.r_max);
  std::vector<double> row(n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < 4; ++a) {
      std::fill(row.begin(), row.end(), 0.0);
      row[move(s, a)] += 1.0 - spec.slip;
      for (int b = 0; b < 4; ++b) row[move(s, b)] += spec.slip / 4.0;
      mdp.set_transition(s, a, row);
      if (s == n - 1) mdp.set_reward(s, a, spec.r_max);
    }
  }
  std::vector<double> rho0(n, 0.0);
  rho0[0] = 1.0;
  mdp.set_rho0(std::move(rho0));
  return mdp;
}

// ---------------------------------------------------------------------------
// Policies

Vec UniformPolicy::act(const Vec&, Rng& rng) const {
  Vec a(low_.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = rng.uniform(low_[i], high_[i]);
  return a;
}

Vec UniformPolicy::mean_action(const Vec&) const { return 0.5 * (low_ + high_); }

namespace {

Vec clip_box(const Vec& a, double bound) { return a.cwiseMax(-bound).cwiseMin(bound); }

/// Waypoint tracker for the point mass: steers toward the goal at a modest
/// cruise speed with Gaussian action noise. Deliberately slower than the
/// task allows.
class PointMassTracker : public Policy {
 public:
  explicit PointMassTracker(const PointMassSpec& spec) : spec_(spec) {}

  Vec mean_action(const Vec& s) const override {
    Eigen::Vector2d to_goal(spec_.goal_x - s[0], spec_.goal_y - s[1]);
    const double dist = to_goal.norm();
    Eigen::Vector2d v_des = Eigen::Vector2d::Zero();
    if (dist > 1e-9) v_des = cruise_ * std::min(1.0, dist / 0.3) * to_goal / dist;
    const Eigen::Vector2d v(s[2], s[3]);
    const Eigen::Vector2d a = (gain_ * (v_des - v) + spec_.drag * v) / spec_.force;
    return clip_box(a, 1.0);
  }

  Vec act(const Vec& s, Rng& rng) const override {
    Vec a = mean_action(s);
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += noise_ * rng.normal();
    return clip_box(a, 1.0);
  }

 private:
  PointMassSpec spec_;
  double cruise_ = 0.5;
  double gain_ = 3.0;
  double noise_ = 0.3;
};

/// Energy pumping away from the top, PD control near it. Gains are soft and
/// the torque is noisy, so the swing-up often needs several attempts.
class PendulumSwing : public Policy {
 public:
  explicit PendulumSwing(const PendulumSpec& spec) : spec_(spec) {}

  Vec mean_action(const Vec& s) const override {
    const double theta = s[0];
    const double omega = s[1];
    double u;
    if (std::abs(theta) < 0.6) {
      u = -(8.0 * theta + 1.5 * omega);
    } else {
      const double ml2 = spec_.mass * spec_.length * spec_.length;
      const double energy = 0.5 * ml2 * omega * omega +
                            spec_.mass * spec_.g * spec_.length * (std::cos(theta) - 1.0);
      u = -0.5 * energy * omega;
    }
    Vec a(1);
    a[0] = std::clamp(u, -spec_.max_torque, spec_.max_torque);
    return a;
  }

  Vec act(const Vec& s, Rng& rng) const override {
    Vec a = mean_action(s);
    a[0] = std::clamp(a[0] + 0.3 * spec_.max_torque * rng.normal(), -spec_.max_torque,
                      spec_.max_torque);
    return a;
  }

 private:
  PendulumSpec spec_;
};

[[noreturn]] void unknown_behavior(std::string_view task, std::string_view name) {
  std::ostringstream msg;
  msg << task << ": unknown behavior policy '" << name << "' (expected partial or random)";
  throw std::invalid_argument(msg.str());
}

}  // namespace

// ---------------------------------------------------------------------------
// Point mass

PointMass::PointMass(PointMassSpec spec) : spec_(spec) {
  if (!(spec_.dt > 0.0) || spec_.horizon < 1) {
    throw std::invalid_argument("point-mass: dt and horizon must be positive");
  }
  if (!(spec_.cliff_reward <= -1.0)) {
    throw std::invalid_argument("point-mass: cliff_reward must be <= -1");
  }
}

double PointMass::r_max() const { return std::abs(spec_.cliff_reward); }

bool PointMass::in_pit(const Vec& s) const {
  const double dx = s[0] - spec_.pit_x;
  const double dy = s[1] - spec_.pit_y;
  return dx * dx + dy * dy <= spec_.pit_radius * spec_.pit_radius;
}

Vec PointMass::reset(Rng& rng, std::size_t) const {
  Vec s = Vec::Zero(4);
  s[0] = spec_.start_noise * rng.normal();
  s[1] = spec_.start_noise * rng.normal();
  return s;
}

Vec PointMass::clip_action(const Vec& action) const { return clip_box(action, 1.0); }

double PointMass::reward(const Vec& s, const Vec&) const {
  if (in_pit(s)) return spec_.cliff_reward;
  const double gx = spec_.goal_x - s[0];
  const double gy = spec_.goal_y - s[1];
  const double dist = std::hypot(gx, gy);
  double toward = 0.0;
  if (dist > 1e-9) toward = (s[2] * gx + s[3] * gy) / dist;
  const double proximity = 1.0 - std::min(dist, 1.0);
  const double velocity = 0.5 * std::clamp(toward / spec_.velocity_scale, -1.0, 1.0);
  return std::min(1.0, proximity + velocity);
}

StepResult PointMass::step(const Vec& s, const Vec& action, Rng& rng, std::size_t) const {
  const Vec a = clip_action(action);
  StepResult out;
  out.reward = reward(s, a);
  // draw the noise unconditionally so the stream position does not depend on
  // where the mass is
  const double n0 = spec_.noise * rng.normal();
  const double n1 = spec_.noise * rng.normal();
  if (in_pit(s)) {
    out.next_state = s;
    out.next_state[2] = 0.0;
    out.next_state[3] = 0.0;
    return out;
  }
  Vec next(4);
  next[0] = s[0] + spec_.dt * s[2];
  next[1] = s[1] + spec_.dt * s[3];
  next[2] = s[2] + spec_.dt * (spec_.force * a[0] - spec_.drag * s[2]) + n0;
  next[3] = s[3] + spec_.dt * (spec_.force * a[1] - spec_.drag * s[3]) + n1;
  if (std::hypot(next[2], next[3]) > spec_.crash_speed) {
    next << spec_.pit_x, spec_.pit_y, 0.0, 0.0;
  }
  out.next_state = std::move(next);
  return out;
}

std::unique_ptr<Policy> PointMass::behavior_policy(std::string_view name) const {
  if (name == "partial") return std::make_unique<PointMassTracker>(spec_);
  if (name == "random") {
    return std::make_unique<UniformPolicy>(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  }
  unknown_behavior("point-mass", name);
}

// ---------------------------------------------------------------------------
// Pendulum

Pendulum::Pendulum(PendulumSpec spec) : spec_(spec) {
  if (!(spec_.dt > 0.0) || spec_.horizon < 1) {
    throw std::invalid_argument("pendulum: dt and horizon must be positive");
  }
}

double Pendulum::r_max() const {
  const double pi = std::numbers::pi;
  return pi * pi + 0.1 * spec_.max_speed * spec_.max_speed +
         0.001 * spec_.max_torque * spec_.max_torque;
}

Vec Pendulum::reset(Rng& rng, std::size_t) const {
  Vec s(2);
  const double theta = std::numbers::pi + spec_.start_noise * rng.normal();
  s[0] = std::remainder(theta, 2.0 * std::numbers::pi);
  s[1] = spec_.start_noise * rng.normal();
  return s;
}

Vec Pendulum::clip_action(const Vec& action) const { return clip_box(action, spec_.max_torque); }

double Pendulum::reward(const Vec& s, const Vec& a) const {
  return -(s[0] * s[0] + 0.1 * s[1] * s[1] + 0.001 * a[0] * a[0]);
}

StepResult Pendulum::step(const Vec& s, const Vec& action, Rng& rng, std::size_t) const {
  const Vec a = clip_action(action);
  const double noise = spec_.noise * rng.normal();
  const double ml2 = spec_.mass * spec_.length * spec_.length;
  const double accel = spec_.g / spec_.length * std::sin(s[0]) + a[0] / ml2;
  StepResult out;
  out.reward = reward(s, a);
  out.next_state.resize(2);
  out.next_state[0] = std::remainder(s[0] + spec_.dt * s[1], 2.0 * std::numbers::pi);
  out.next_state[1] =
      std::clamp(s[1] + spec_.dt * accel + noise, -spec_.max_speed, spec_.max_speed);
  return out;
}

std::unique_ptr<Policy> Pendulum::behavior_policy(std::string_view name) const {
  if (name == "partial") return std::make_unique<PendulumSwing>(spec_);
  if (name == "random") {
    return std::make_unique<UniformPolicy>(Vec::Constant(1, -spec_.max_torque),
                                           Vec::Constant(1, spec_.max_torque));
  }
  unknown_behavior("pendulum", name);
}

std::unique_ptr<ContinuousTask> build_continuous_task(const ContinuousTaskSpec& spec) {
  if (spec.kind == "point-mass") return std::make_unique<PointMass>(spec.point_mass);
  if (spec.kind == "pendulum") return std::make_unique<Pendulum>(spec.pendulum);
  throw std::invalid_argument("unknown continuous task kind '" + spec.kind + "'");
}

}  // namespace morel

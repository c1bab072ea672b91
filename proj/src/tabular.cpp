#include "morel/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace morel {

namespace {

constexpr double kSumTolerance = 1e-12;

double sum(std::span<const double> xs) { return std::accumulate(xs.begin(), xs.end(), 0.0); }

void check_distribution(std::span<const double> row, const std::string& what) {
  for (double p : row)
    if (!(p >= 0.0)) throw std::invalid_argument(what + " has a negative or NaN entry");
  if (std::abs(sum(row) - 1.0) > kSumTolerance)
    throw std::invalid_argument(what + " does not sum to 1");
}

void check_shapes(const TabularMdp& mdp, const TabularPolicy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    std::ostringstream msg;
    msg << "policy shape " << policy.n_states() << "x" << policy.n_actions()
        << " does not match MDP shape " << mdp.n_states() << "x" << mdp.n_actions();
    throw std::invalid_argument(msg.str());
  }
}

// P_pi and r_pi for the Markov chain induced by the policy.
void induced_chain(const TabularMdp& mdp, const TabularPolicy& policy, Mat& P, Vec& r) {
  const int S = mdp.n_states();
  P.setZero(S, S);
  r.setZero(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double pa = policy.prob(s, a);
      if (pa == 0.0) continue;
      r[s] += pa * mdp.reward(s, a);
      const auto row = mdp.transition(s, a);
      for (int n = 0; n < S; ++n) P(s, n) += pa * row[n];
    }
  }
}

}  // namespace

TabularMdp::TabularMdp(int n_states, int n_actions, double gamma, double r_max)
    : n_states_(n_states), n_actions_(n_actions), gamma_(gamma), r_max_(r_max),
      reward_(static_cast<std::size_t>(n_states) * n_actions, 0.0),
      transition_(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0),
      rho0_(static_cast<std::size_t>(n_states), 0.0) {
  if (n_states < 1 || n_actions < 1)
    throw std::invalid_argument("TabularMdp needs at least one state and one action");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(r_max > 0.0)) throw std::invalid_argument("r_max must be positive");
}

void TabularMdp::set_transition(int s, int a, std::span<const double> row) {
  if (static_cast<int>(row.size()) != n_states_)
    throw std::invalid_argument("transition row has the wrong length");
  std::copy(row.begin(), row.end(), transition(s, a).begin());
}

void TabularMdp::set_transition(int s, int a, int next) {
  auto row = transition(s, a);
  std::fill(row.begin(), row.end(), 0.0);
  row[next] = 1.0;
}

void TabularMdp::set_rho0(std::vector<double> rho0) {
  if (static_cast<int>(rho0.size()) != n_states_)
    throw std::invalid_argument("rho0 has the wrong length");
  rho0_ = std::move(rho0);
}

void TabularMdp::validate() const {
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      std::ostringstream where;
      where << "transition(" << s << ", " << a << ")";
      check_distribution(transition(s, a), where.str());
      if (!(std::abs(reward(s, a)) <= r_max_)) {
        std::ostringstream msg;
        msg << "reward(" << s << ", " << a << ") = " << reward(s, a) << " exceeds r_max " << r_max_;
        throw std::invalid_argument(msg.str());
      }
    }
  }
  check_distribution(rho0_, "rho0");
}

TabularPolicy TabularPolicy::deterministic(const std::vector<int>& actions, int n_actions) {
  TabularPolicy p;
  p.n_states_ = static_cast<int>(actions.size());
  p.n_actions_ = n_actions;
  p.deterministic_ = true;
  p.probs_.assign(actions.size() * n_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions)
      throw std::invalid_argument("deterministic policy action out of range");
    p.probs_[s * n_actions + actions[s]] = 1.0;
  }
  return p;
}

TabularPolicy TabularPolicy::stochastic(int n_states, int n_actions, std::vector<double> probs) {
  if (probs.size() != static_cast<std::size_t>(n_states) * n_actions)
    throw std::invalid_argument("stochastic policy table has the wrong size");
  TabularPolicy p;
  p.n_states_ = n_states;
  p.n_actions_ = n_actions;
  p.probs_ = std::move(probs);
  for (int s = 0; s < n_states; ++s) check_distribution(p.row(s), "policy row");
  return p;
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  return stochastic(n_states, n_actions,
                    std::vector<double>(static_cast<std::size_t>(n_states) * n_actions,
                                        1.0 / n_actions));
}

int TabularPolicy::greedy_action(int s) const {
  const auto r = row(s);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

int TabularPolicy::sample(int s, Rng& rng) const {
  if (deterministic_) return greedy_action(s);
  return static_cast<int>(rng.categorical(row(s)));
}

TabularPolicy TabularPolicy::restricted(int n) const {
  TabularPolicy p = *this;
  p.n_states_ = n;
  p.probs_.resize(static_cast<std::size_t>(n) * n_actions_);
  return p;
}

TabularPolicy TabularPolicy::extended(int n) const {
  TabularPolicy p = *this;
  p.n_states_ = n;
  p.probs_.resize(static_cast<std::size_t>(n) * n_actions_, 1.0 / n_actions_);
  if (deterministic_) {
    for (int s = n_states_; s < n; ++s) {
      for (int a = 0; a < n_actions_; ++a) p.probs_[static_cast<std::size_t>(s) * n_actions_ + a] = a == 0;
    }
  }
  return p;
}

Vec TabularPolicy::act(const Vec& state, Rng& rng) const {
  return index_vector(sample(as_index(state), rng));
}

Vec TabularPolicy::mean_action(const Vec& state) const {
  return index_vector(greedy_action(as_index(state)));
}

std::size_t PairSet::size() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

PolicyValue exact_policy_value(const TabularMdp& mdp, const TabularPolicy& policy) {
  check_shapes(mdp, policy);
  Mat P;
  Vec r;
  induced_chain(mdp, policy, P, r);
  const int S = mdp.n_states();
  const Mat A = Mat::Identity(S, S) - mdp.gamma() * P;
  PolicyValue out;
  out.values = A.partialPivLu().solve(r);
  const double residual = (out.values - (r + mdp.gamma() * P * out.values)).lpNorm<Eigen::Infinity>();
  if (!(residual < 1e-10 * mdp.r_max())) {
    std::ostringstream msg;
    msg << "policy evaluation residual " << residual << " above tolerance";
    throw std::runtime_error(msg.str());
  }
  const Eigen::Map<const Vec> rho(mdp.rho0().data(), S);
  out.J = rho.dot(out.values);
  return out;
}

Mat discounted_visitation(const TabularMdp& mdp, const TabularPolicy& policy) {
  check_shapes(mdp, policy);
  Mat P;
  Vec r;
  induced_chain(mdp, policy, P, r);
  const int S = mdp.n_states();
  const Eigen::Map<const Vec> rho(mdp.rho0().data(), S);
  // d_s = (1 - gamma) rho0 + gamma P_pi^T d_s
  const Mat A = Mat::Identity(S, S) - mdp.gamma() * P.transpose();
  const Vec ds = (1.0 - mdp.gamma()) * A.partialPivLu().solve(rho);
  Mat d(S, mdp.n_actions());
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) d(s, a) = std::max(0.0, ds[s]) * policy.prob(s, a);
  return d;
}

double expected_discounted_hitting(const TabularMdp& mdp, const TabularPolicy& policy,
                                   const PairSet& target) {
  check_shapes(mdp, policy);
  if (target.empty()) return 0.0;
  // Target pairs are redirected to an extra absorbing state and pay reward 1
  // once; the value of that indicator-reward chain is E[gamma^T].
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  TabularMdp aug(S + 1, A, mdp.gamma(), 1.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      if (target.contains(s, a)) {
        aug.set_transition(s, a, S);
        aug.set_reward(s, a, 1.0);
      } else {
        auto row = aug.transition(s, a);
        const auto src = mdp.transition(s, a);
        std::copy(src.begin(), src.end(), row.begin());
      }
    }
  }
  for (int a = 0; a < A; ++a) aug.set_transition(S, a, S);
  std::vector<double> rho = mdp.rho0();
  rho.push_back(0.0);
  aug.set_rho0(std::move(rho));
  return exact_policy_value(aug, policy.extended(S + 1)).J;
}

OptimalSolution optimal_policy(const TabularMdp& mdp) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  std::vector<int> actions(S, 0);
  PolicyValue value = exact_policy_value(mdp, TabularPolicy::deterministic(actions, A));
  for (int iter = 0; iter < 10 * S * A + 100; ++iter) {
    bool changed = false;
    for (int s = 0; s < S; ++s) {
      const auto q = [&](int a) {
        double next = 0.0;
        const auto row = mdp.transition(s, a);
        for (int n = 0; n < S; ++n) next += row[n] * value.values[n];
        return mdp.reward(s, a) + mdp.gamma() * next;
      };
      const double current = q(actions[s]);
      int best = actions[s];
      double best_q = current;
      for (int a = 0; a < A; ++a) {
        const double qa = q(a);
        // strict improvement beyond round-off keeps policy iteration finite
        if (qa > best_q + 1e-12 * (1.0 + std::abs(best_q))) {
          best_q = qa;
          best = a;
        }
      }
      if (best != actions[s]) {
        actions[s] = best;
        changed = true;
      }
    }
    value = exact_policy_value(mdp, TabularPolicy::deterministic(actions, A));
    if (!changed) break;
  }
  // canonical tie-breaking: lowest index among actions within round-off of the best
  for (int s = 0; s < S; ++s) {
    double best_q = -std::numeric_limits<double>::infinity();
    std::vector<double> qs(A);
    for (int a = 0; a < A; ++a) {
      double next = 0.0;
      const auto row = mdp.transition(s, a);
      for (int n = 0; n < S; ++n) next += row[n] * value.values[n];
      qs[a] = mdp.reward(s, a) + mdp.gamma() * next;
      best_q = std::max(best_q, qs[a]);
    }
    for (int a = 0; a < A; ++a) {
      if (qs[a] >= best_q - 1e-12 * (1.0 + std::abs(best_q))) {
        actions[s] = a;
        break;
      }
    }
  }
  OptimalSolution out;
  out.policy = TabularPolicy::deterministic(actions, A);
  const PolicyValue final_value = exact_policy_value(mdp, out.policy);
  out.values = final_value.values;
  out.J = final_value.J;
  return out;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - q[i]);
  return 0.5 * total;
}

TabularEnv::TabularEnv(TabularMdp mdp, std::string name, int horizon)
    : mdp_(std::move(mdp)), name_(std::move(name)), horizon_(horizon) {}

Vec TabularEnv::reset(Rng& rng, std::size_t) const {
  return index_vector(static_cast<int>(rng.categorical(mdp_.rho0())));
}

Vec TabularEnv::clip_action(const Vec& action) const {
  const double a = std::clamp(std::round(action[0]), 0.0, mdp_.n_actions() - 1.0);
  return index_vector(static_cast<int>(a));
}

StepResult TabularEnv::step(const Vec& state, const Vec& action, Rng& rng, std::size_t) const {
  const int s = as_index(state);
  const int a = as_index(action);
  StepResult out;
  out.reward = mdp_.reward(s, a);
  out.next_state = index_vector(static_cast<int>(rng.categorical(mdp_.transition(s, a))));
  return out;
}

}  // namespace morel

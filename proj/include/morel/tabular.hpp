#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "morel/simulation.hpp"

namespace morel {

/// Explicit finite MDP (S, A, r, P, rho0, gamma) with reward bound r_max.
/// Storage is dense and row-major: transition(s, a) is a contiguous row over
/// next states.
class TabularMdp {
 public:
  TabularMdp() = default;
  TabularMdp(int n_states, int n_actions, double gamma, double r_max);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  double r_max() const { return r_max_; }

  double reward(int s, int a) const { return reward_[index(s, a)]; }
  void set_reward(int s, int a, double r) { reward_[index(s, a)] = r; }

  std::span<const double> transition(int s, int a) const {
    return {transition_.data() + index(s, a) * n_states_, static_cast<std::size_t>(n_states_)};
  }
  std::span<double> transition(int s, int a) {
    return {transition_.data() + index(s, a) * n_states_, static_cast<std::size_t>(n_states_)};
  }
  double p(int s, int a, int next) const { return transition(s, a)[next]; }
  void set_transition(int s, int a, std::span<const double> row);
  /// Deterministic transition to `next`.
  void set_transition(int s, int a, int next);

  const std::vector<double>& rho0() const { return rho0_; }
  void set_rho0(std::vector<double> rho0);

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;

 private:
  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * n_actions_ + static_cast<std::size_t>(a);
  }

  int n_states_ = 0;
  int n_actions_ = 0;
  double gamma_ = 0.0;
  double r_max_ = 1.0;
  std::vector<double> reward_;
  std::vector<double> transition_;
  std::vector<double> rho0_;
};

/// Tabular policy: one action distribution per state. Deterministic policies
/// are one-hot rows with the `deterministic` flag set. As a simulation policy
/// the state vector holds the state index and the action vector the action
/// index.
class TabularPolicy : public Policy {
 public:
  TabularPolicy() = default;

  static TabularPolicy deterministic(const std::vector<int>& actions, int n_actions);
  static TabularPolicy stochastic(int n_states, int n_actions, std::vector<double> probs);
  static TabularPolicy uniform(int n_states, int n_actions);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  bool is_deterministic() const { return deterministic_; }

  double prob(int s, int a) const { return probs_[static_cast<std::size_t>(s) * n_actions_ + a]; }
  std::span<const double> row(int s) const {
    return {probs_.data() + static_cast<std::size_t>(s) * n_actions_,
            static_cast<std::size_t>(n_actions_)};
  }
  /// Most probable action; ties go to the lowest index.
  int greedy_action(int s) const;
  int sample(int s, Rng& rng) const;

  /// First `n` states only.
  TabularPolicy restricted(int n) const;
  /// Pads with uniform rows up to `n` states.
  TabularPolicy extended(int n) const;

  Vec act(const Vec& state, Rng& rng) const override;
  Vec mean_action(const Vec& state) const override;

  bool operator==(const TabularPolicy& other) const {
    return n_states_ == other.n_states_ && n_actions_ == other.n_actions_ &&
           deterministic_ == other.deterministic_ && probs_ == other.probs_;
  }

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  bool deterministic_ = false;
  std::vector<double> probs_;
};

/// Set of (state, action) pairs as a dense mask.
class PairSet {
 public:
  PairSet() = default;
  PairSet(int n_states, int n_actions)
      : n_states_(n_states), n_actions_(n_actions),
        bits_(static_cast<std::size_t>(n_states) * n_actions, 0) {}

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  bool contains(int s, int a) const { return bits_[static_cast<std::size_t>(s) * n_actions_ + a]; }
  void insert(int s, int a) { bits_[static_cast<std::size_t>(s) * n_actions_ + a] = 1; }
  void erase(int s, int a) { bits_[static_cast<std::size_t>(s) * n_actions_ + a] = 0; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  bool operator==(const PairSet& other) const = default;

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct PolicyValue {
  Vec values;
  double J = 0.0;
};

/// Solves V = r_pi + gamma P_pi V by LU and returns V and J = rho0 . V.
PolicyValue exact_policy_value(const TabularMdp& mdp, const TabularPolicy& policy);

/// Normalized discounted occupancy d(s, a) from the exact flow equations.
/// Returned as an n_states x n_actions matrix.
Mat discounted_visitation(const TabularMdp& mdp, const TabularPolicy& policy);

/// E[gamma^T] where T is the first time a pair of `target` is executed
/// (T = infinity contributes 0).
double expected_discounted_hitting(const TabularMdp& mdp, const TabularPolicy& policy,
                                   const PairSet& target);

struct OptimalSolution {
  TabularPolicy policy;
  Vec values;
  double J = 0.0;
};

/// Policy iteration with exact evaluation; ties broken by lowest action index.
OptimalSolution optimal_policy(const TabularMdp& mdp);

double tv_distance(std::span<const double> p, std::span<const double> q);

/// Tabular MDP as a simulatable environment. The state vector is the state
/// index; horizon is effectively unbounded so callers pick truncation.
class TabularEnv : public Environment {
 public:
  explicit TabularEnv(TabularMdp mdp, std::string name = "tabular", int horizon = 1 << 30);

  const TabularMdp& mdp() const { return mdp_; }

  std::string id() const override { return name_; }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int horizon() const override { return horizon_; }
  double gamma() const override { return mdp_.gamma(); }
  double r_max() const override { return mdp_.r_max(); }
  Vec reset(Rng& rng, std::size_t episode) const override;
  /// Rounds to the nearest valid action index.
  Vec clip_action(const Vec& action) const override;
  StepResult step(const Vec& state, const Vec& action, Rng& rng,
                  std::size_t episode) const override;

 private:
  TabularMdp mdp_;
  std::string name_;
  int horizon_;
};

inline Vec index_vector(int i) { return Vec::Constant(1, static_cast<double>(i)); }
inline int as_index(const Vec& v) { return static_cast<int>(v[0]); }

}  // namespace morel

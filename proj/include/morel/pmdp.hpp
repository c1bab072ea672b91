#pragma once

#include <string>
#include <vector>

#include "morel/dynamics_model.hpp"
#include "morel/env_zoo.hpp"
#include "morel/tabular.hpp"
#include "morel/usad.hpp"

namespace morel {

/// Row-major n_states x n_actions table of the (known) reward function.
std::vector<double> reward_table(const TabularMdp& mdp);

/// Pessimistic MDP over a count model. States 0..n-1 are the original
/// states, state n is HALT. Unknown pairs and every HALT action lead to
/// HALT; HALT pays -kappa; known pairs use P_hat and the known reward.
struct PessimisticTabular {
  TabularMdp mdp;
  int halt = 0;
  double kappa = 0.0;
  PairSet unknown;
  std::vector<double> rho0_hat;  // over original states

  int n_original() const { return halt; }
};

/// `rewards` is reward_table(...) of the known reward function. Throws
/// std::invalid_argument on kappa < 0 or if `unknown` misses an unvisited
/// pair.
PessimisticTabular build_tabular_pmdp(const TabularCountModel& model, const PairSet& unknown,
                                      const std::vector<double>& rewards, double kappa,
                                      const std::vector<double>& rho0_hat, double gamma,
                                      double r_max);

/// Plain MLE model with no pessimism. Unvisited pairs become zero-information
/// self-loops that keep the known reward.
TabularMdp build_naive_tabular(const TabularCountModel& model, const std::vector<double>& rewards,
                               const std::vector<double>& rho0_hat, double gamma, double r_max);

enum class HaltMode { exact_sum, single_penalty };
enum class MemberMode { cycle, average };

std::string to_string(HaltMode mode);
HaltMode parse_halt_mode(const std::string& name);
std::string to_string(MemberMode mode);
MemberMode parse_member_mode(const std::string& name);

/// Reward of the truncating step on an unknown pair.
///   exact_sum:      r(s, a) - gamma kappa / (1 - gamma)
///   single_penalty: -kappa
/// exact_sum folds the absorbing HALT tail into one reward, so a truncated
/// return equals the infinite-horizon return of the pessimistic MDP.
double halt_reward(HaltMode mode, double reward, double kappa, double gamma);

/// kappa = offset - r_min(D), the magnitude of a penalty reward r_min(D) -
/// offset. Clamped at 0.
double default_kappa(const OfflineDataset& dataset, double offset);

/// Simulates a PessimisticTabular with rollout-level truncation: the first
/// unknown pair ends the episode with halt_reward. Randomness is consumed
/// exactly as by TabularEnv on the augmented MDP, so trajectories match
/// until truncation.
class TabularPessimisticRollout : public Environment {
 public:
  TabularPessimisticRollout(const PessimisticTabular& pmdp, HaltMode mode,
                            int horizon = 1 << 30);

  std::string id() const override { return "tabular-pmdp"; }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int horizon() const override { return horizon_; }
  double gamma() const override { return pmdp_->mdp.gamma(); }
  double r_max() const override { return pmdp_->mdp.r_max(); }
  Vec reset(Rng& rng, std::size_t episode) const override { return augmented_.reset(rng, episode); }
  Vec clip_action(const Vec& action) const override { return augmented_.clip_action(action); }
  StepResult step(const Vec& state, const Vec& action, Rng& rng,
                  std::size_t episode) const override;

 private:
  const PessimisticTabular* pmdp_;
  TabularEnv augmented_;
  HaltMode mode_;
  int horizon_;
};

struct PessimisticRolloutConfig {
  double kappa = 0.0;
  HaltMode halt_mode = HaltMode::exact_sum;
  MemberMode member_mode = MemberMode::cycle;
};

/// Continuous pessimistic MDP over a learned ensemble. Episode e starts
/// from a dataset start state and follows member e mod K (or the member
/// average). Pairs the detector marks unknown, and pairs whose predictions
/// are non-finite, end the episode with halt_reward. With a disabled
/// detector this is plain model-based simulation.
///
/// Holds pointers to the task and detector, which must outlive it.
class PessimisticRollout : public Environment {
 public:
  PessimisticRollout(const ContinuousTask& task, const UsadEnsemble& usad, StartSampler starts,
                     PessimisticRolloutConfig config);

  const PessimisticRolloutConfig& config() const { return config_; }
  /// Steps that were truncated because a member produced a non-finite state.
  std::size_t nonfinite_steps() const { return nonfinite_; }

  std::string id() const override { return task_->id() + "-pmdp"; }
  int state_dim() const override { return task_->state_dim(); }
  int action_dim() const override { return task_->action_dim(); }
  int horizon() const override { return task_->horizon(); }
  double gamma() const override { return task_->gamma(); }
  double r_max() const override;
  Vec reset(Rng& rng, std::size_t episode) const override;
  Vec clip_action(const Vec& action) const override { return task_->clip_action(action); }
  StepResult step(const Vec& state, const Vec& action, Rng& rng,
                  std::size_t episode) const override;

 private:
  const ContinuousTask* task_;
  const UsadEnsemble* usad_;
  StartSampler starts_;
  PessimisticRolloutConfig config_;
  mutable std::size_t nonfinite_ = 0;
};

}  // namespace morel

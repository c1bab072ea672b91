#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "morel/mlp.hpp"
#include "morel/offline_dataset.hpp"

namespace morel {

/// Count-based maximum likelihood model of a tabular MDP. Pairs that never
/// appear in the data are unvisited and carry no distribution.
class TabularCountModel {
 public:
  TabularCountModel() = default;
  TabularCountModel(int n_states, int n_actions);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  void add(int s, int a, int next, double reward);

  long count(int s, int a, int next) const { return counts_[flat(s, a) * n_states_ + next]; }
  long visits(int s, int a) const { return n_sa_[flat(s, a)]; }
  bool visited(int s, int a) const { return visits(s, a) > 0; }

  /// counts / n(s, a). Throws std::logic_error on an unvisited pair.
  std::vector<double> p_hat(int s, int a) const;
  /// Mean observed reward. Throws std::logic_error on an unvisited pair.
  double r_hat(int s, int a) const;

 private:
  std::size_t flat(int s, int a) const {
    return static_cast<std::size_t>(s) * n_actions_ + static_cast<std::size_t>(a);
  }

  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<long> counts_;
  std::vector<long> n_sa_;
  std::vector<double> reward_sum_;
};

/// Tabular datasets store the state / action index in coordinate 0.
TabularCountModel fit_tabular(const OfflineDataset& dataset, int n_states, int n_actions);

/// Gaussian dynamics model with mean
///   f(s, a) = s + sigma_delta * net((s - mu_s) / sigma_s, (a - mu_a) / sigma_a)
/// and fixed diagonal noise.
class GaussianMlpModel {
 public:
  GaussianMlpModel() = default;
  GaussianMlpModel(Mlp net, NormStats stats, Vec noise_std);

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  const NormStats& stats() const { return stats_; }
  const Vec& noise_std() const { return noise_std_; }
  int state_dim() const { return static_cast<int>(stats_.mu_s.size()); }
  int action_dim() const { return static_cast<int>(stats_.mu_a.size()); }

  /// Mean next state. Throws std::invalid_argument on non-finite input or a
  /// dimension mismatch.
  Vec predict(const Vec& s, const Vec& a) const;
  /// Batched mean prediction: one sample per column. No input checks.
  Mat predict_batch(const Mat& s, const Mat& a) const;
  /// Mean plus N(0, diag(noise_std^2)).
  Vec sample(const Vec& s, const Vec& a, Rng& rng) const;

  /// Network input for a batch: normalized states stacked over normalized
  /// actions.
  Mat inputs(const Mat& s, const Mat& a) const;

 private:
  Mlp net_;
  NormStats stats_;
  Vec noise_std_;
};

struct EnsembleConfig {
  int layers = 2;  // hidden layers
  int width = 512;
  int epochs = 50;
  double step_size = 5e-4;
  int batch_size = 256;
  int K = 4;
  std::uint64_t seed = 0;
  /// Fraction of the dataset (taken from the end) held out for validation.
  double holdout = 0.1;
  /// noise_std = noise_scale * sigma_delta.
  double noise_scale = 0.5;
};

class DynamicsEnsemble {
 public:
  DynamicsEnsemble() = default;
  /// Throws std::invalid_argument unless there are at least two members with
  /// identical architecture and normalization.
  explicit DynamicsEnsemble(std::vector<GaussianMlpModel> members);

  int size() const { return static_cast<int>(members_.size()); }
  const GaussianMlpModel& member(int i) const { return members_[i]; }
  const std::vector<GaussianMlpModel>& members() const { return members_; }
  int state_dim() const { return members_.front().state_dim(); }
  int action_dim() const { return members_.front().action_dim(); }

 private:
  std::vector<GaussianMlpModel> members_;
};

struct MemberLog {
  double initial_holdout_mse = 0.0;
  double final_holdout_mse = 0.0;
  std::vector<double> epoch_loss;
};

struct FitReport {
  std::vector<MemberLog> members;
};

/// Mean squared error of the network on normalized deltas,
/// mean over samples and state dimensions.
double normalized_mse(const GaussianMlpModel& model, const OfflineDataset& dataset,
                      std::size_t begin, std::size_t end);

/// Loss and gradient on one batch (columns of `x`, targets `y`), the same
/// objective the trainer minimizes.
double mse_loss_and_gradient(const Mlp& net, const Mat& x, const Mat& y, Vec& grad);

/// Trains K members by Adam on minibatches. Member i draws its initial
/// weights and minibatch order from Rng(seed).split("ensemble").split(i).
/// Throws std::runtime_error naming member, epoch and batch on a non-finite
/// loss.
DynamicsEnsemble fit_ensemble(const OfflineDataset& dataset, const EnsembleConfig& config,
                              FitReport* report = nullptr);

void save_checkpoint(const GaussianMlpModel& model, std::ostream& out,
                     std::uint64_t seed = 0);
GaussianMlpModel load_checkpoint(std::istream& in);

}  // namespace morel

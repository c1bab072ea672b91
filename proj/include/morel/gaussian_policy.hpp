#pragma once

#include <iosfwd>

#include "morel/mlp.hpp"

namespace morel {

/// Diagonal Gaussian policy a ~ N(net((s - shift) / scale), diag(exp(2 log_std))).
/// The flat parameter vector is the network parameters followed by log_std.
/// The input normalization is fixed at construction and not trained.
class GaussianMlpPolicy : public Policy {
 public:
  GaussianMlpPolicy() = default;
  GaussianMlpPolicy(int state_dim, int action_dim, std::vector<int> hidden, double log_std_init,
                    double log_std_min);

  int state_dim() const { return net_.input_dim(); }
  int action_dim() const { return net_.output_dim(); }
  Eigen::Index n_params() const { return net_.n_params() + action_dim(); }
  double log_std_min() const { return log_std_min_; }

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  const Vec& log_std() const { return log_std_; }
  /// Clamps entries below log_std_min.
  void set_log_std(const Vec& log_std);

  const Vec& input_shift() const { return shift_; }
  const Vec& input_scale() const { return scale_; }
  void set_input_normalization(Vec shift, Vec scale);

  Vec params() const;
  /// Sets network weights and log_std (clamped at log_std_min).
  void set_params(const Vec& theta);

  void init(Rng& rng) { net_.init(rng); }

  Vec act(const Vec& state, Rng& rng) const override;
  Vec mean_action(const Vec& state) const override;

  /// Means for a batch of states (one per column).
  Mat mean_batch(const Mat& states) const;
  /// log pi(a_i | s_i) for each column.
  Vec log_prob(const Mat& states, const Mat& actions) const;
  double log_prob(const Vec& state, const Vec& action) const;
  /// Column i is grad_theta log pi(a_i | s_i) (n_params x batch).
  Mat score(const Mat& states, const Mat& actions) const;
  /// Gradient of sum_i w_i log pi(a_i | s_i); avoids the per-sample matrix.
  Vec weighted_score(const Mat& states, const Mat& actions, const Vec& weights) const;

 private:
  Mat normalize(const Mat& states) const;

  Mlp net_;
  Vec log_std_;
  double log_std_min_ = -2.0;
  Vec shift_;
  Vec scale_;
};

void save_policy(const GaussianMlpPolicy& policy, std::ostream& out);
GaussianMlpPolicy load_policy(std::istream& in);

}  // namespace morel

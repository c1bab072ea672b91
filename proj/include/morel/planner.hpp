#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "morel/gaussian_policy.hpp"
#include "morel/offline_dataset.hpp"
#include "morel/tabular.hpp"

namespace morel {

// ---------------------------------------------------------------------------
// Tabular

struct ViConfig {
  /// Stop once the certificate drops to this value.
  double tolerance = 1e-8;
  int max_iters = 1000000;
};

struct ViResult {
  TabularPolicy policy;  // greedy, ties to the lowest action index
  Vec values;            // last iterate V_k
  /// 2 gamma |V_k - V_{k-1}|_inf / (1 - gamma): bound on J* - J(policy).
  double certificate = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Value iteration from V = 0. If max_iters runs out the greedy policy of the
/// last iterate is returned with its (larger) certificate.
ViResult value_iteration(const TabularMdp& mdp, const ViConfig& config = {});

/// Empirical action frequencies per visited state, uniform elsewhere.
TabularPolicy behavior_clone_tabular(const OfflineDataset& dataset, int n_states, int n_actions);

// ---------------------------------------------------------------------------
// Continuous

struct BcConfig {
  std::vector<int> hidden{32, 32};
  int epochs = 20;
  double lr = 1e-3;
  int batch_size = 256;
  double log_std_init = -0.5;
  double log_std_min = -2.5;
  std::uint64_t seed = 0;
};

struct BcReport {
  std::vector<double> epoch_nll;  // mean negative log-likelihood per epoch
};

/// Gaussian MLP policy fit by maximum likelihood (Adam) on the dataset's
/// (s, a) pairs. Inputs are normalized with the dataset state statistics.
GaussianMlpPolicy behavior_clone(const OfflineDataset& dataset, const BcConfig& config,
                                 BcReport* report = nullptr);

struct NpgConfig {
  int n_updates = 200;
  int n_traj = 40;
  /// 0 means the environment's horizon.
  int horizon = 0;
  int cg_iters = 25;
  double cg_damping = 1e-4;
  /// delta in theta += sqrt(delta / x'Fx) x.
  double step_size = 0.05;
  int eval_traj = 20;
  /// Subtract the per-timestep mean return-to-go before normalizing.
  bool time_baseline = true;
  std::uint64_t seed = 0;
};

/// Samples from trajectories flattened column-wise. `actions` holds the raw
/// policy samples (before clip_action), which is what the score needs.
struct SampleBatch {
  Mat states;
  Mat actions;
  Vec returns_to_go;
  Eigen::VectorXi timesteps;  // step index within the trajectory
  double mean_return = 0.0;   // discounted, per trajectory
  double frac_halted = 0.0;
  int n_traj = 0;
};

/// Trajectory i runs as episode i with Rng rng.split(i).
SampleBatch sample_batch(const Environment& env, const Policy& policy, int n_traj, int horizon,
                         const Rng& rng);

/// Zero mean, unit variance. A constant input maps to zeros.
Vec normalize_advantages(const Vec& returns_to_go);

/// G (G' v) / N for score matrix G (params x samples).
/// Return-to-go minus the mean return-to-go of all samples at the same step.
Vec time_baseline(const Vec& returns_to_go, const Eigen::VectorXi& timesteps);

Vec fisher_vector_product(const Mat& scores, const Vec& v);

struct CgResult {
  Vec x;
  int iterations = 0;
  bool breakdown = false;  // non-positive curvature met
};

/// Solves A x = b for symmetric positive definite A given as a product.
/// Stops when |r| <= residual_tol |b|, so the result is linear in b.
CgResult conjugate_gradient(const std::function<Vec(const Vec&)>& apply, const Vec& b, int iters,
                            double residual_tol = 1e-10);

struct NpgDiagnostics {
  double surrogate_improvement = 0.0;  // g' dtheta
  double kl_step = 0.0;                // dtheta' F dtheta / 2
  double grad_norm = 0.0;
  int cg_iterations = 0;
  bool cg_fallback = false;
};

/// One natural gradient step on `policy` from (states, actions, advantages).
/// On CG breakdown the step falls back to the damped plain gradient.
NpgDiagnostics npg_step(GaussianMlpPolicy& policy, const Mat& states, const Mat& actions,
                        const Vec& advantages, const NpgConfig& config);

struct CurveRow {
  int iteration = 0;
  double pmdp_value = 0.0;
  double pmdp_stderr = 0.0;
  double true_value = 0.0;
  double true_stderr = 0.0;
  double kl_step = 0.0;
  double surrogate_improvement = 0.0;
  double frac_rollouts_halted = 0.0;  // share of model evaluation rollouts that halted
};

void write_curve_csv(const std::vector<CurveRow>& curve, std::ostream& out);

struct TrainResult {
  GaussianMlpPolicy policy;
  std::vector<CurveRow> curve;
  int cg_fallbacks = 0;
};

/// NPG in `model_env` from `policy`. Row 0 evaluates the initial policy, row
/// i the policy after update i. The true environment is only evaluated for
/// the curve, never sampled for learning.
TrainResult train_npg(const Environment& model_env, const Environment& true_env,
                      GaussianMlpPolicy policy, const NpgConfig& config,
                      const std::function<void(const CurveRow&)>& progress = {});

}  // namespace morel

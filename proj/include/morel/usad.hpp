#pragma once

#include <string>
#include <vector>

#include "morel/dynamics_model.hpp"
#include "morel/tabular.hpp"

namespace morel {

/// Test-only detector with access to the true transition model: a pair is
/// known iff it was visited and TV(P_hat, P) <= alpha. Never used by the
/// learning pipeline.
class UsadOracle {
 public:
  UsadOracle(const TabularMdp& truth, const TabularCountModel& model, double alpha);

  double alpha() const { return alpha_; }
  bool is_unknown(int s, int a) const { return unknown_.contains(s, a); }
  const PairSet& unknown_set() const { return unknown_; }
  /// Largest TV distance over pairs judged known (0 if none).
  double max_known_tv() const { return max_known_tv_; }

 private:
  double alpha_;
  PairSet unknown_;
  double max_known_tv_ = 0.0;
};

/// Count detector: unknown iff n(s, a) < n_min.
class UsadCount {
 public:
  UsadCount(const TabularCountModel& model, long n_min = 5);

  long n_min() const { return n_min_; }
  bool is_unknown(int s, int a) const { return unknown_.contains(s, a); }
  const PairSet& unknown_set() const { return unknown_; }

 private:
  long n_min_;
  PairSet unknown_;
};

/// max_{i,j} |f_i(s, a) - f_j(s, a)|_2 over member mean predictions.
double disc(const DynamicsEnsemble& ensemble, const Vec& s, const Vec& a);
/// Same, for a batch (one sample per column).
Vec disc_batch(const DynamicsEnsemble& ensemble, const Mat& states, const Mat& actions);
/// Maximum pairwise distance among the columns of each prediction matrix.
Vec max_pairwise_distance(const std::vector<Mat>& predictions);

struct Calibration {
  double mu_d = 0.0;
  double sigma_d = 0.0;  // population standard deviation
  double m_d = 0.0;
  double beta = 0.0;
  double beta_max = 0.0;
  double threshold = 0.0;
  std::vector<std::string> warnings;
};

/// threshold = mu_d + beta * sigma_d over the given discrepancies.
Calibration calibrate(const std::vector<double>& discs, double beta);

/// Practical detector: unknown iff disc(s, a) > threshold. Holds a pointer
/// to the ensemble, which must outlive it.
class UsadEnsemble {
 public:
  UsadEnsemble(const DynamicsEnsemble& ensemble, Calibration calibration);
  /// Detector that marks everything known (naive model-based planning).
  static UsadEnsemble disabled(const DynamicsEnsemble& ensemble);

  const DynamicsEnsemble& ensemble() const { return *ensemble_; }
  const Calibration& calibration() const { return calibration_; }
  double threshold() const { return calibration_.threshold; }
  bool enabled() const { return enabled_; }

  bool is_unknown(const Vec& s, const Vec& a) const;
  bool is_unknown_disc(double d) const { return enabled_ && d > calibration_.threshold; }

 private:
  const DynamicsEnsemble* ensemble_;
  Calibration calibration_;
  bool enabled_ = true;
};

/// Evaluates disc on every dataset pair and calibrates with `beta`.
UsadEnsemble calibrate_threshold(const DynamicsEnsemble& ensemble, const OfflineDataset& dataset,
                                 double beta);

/// disc on every (s, a) of the dataset, in order.
std::vector<double> dataset_discs(const DynamicsEnsemble& ensemble, const OfflineDataset& dataset);

}  // namespace morel

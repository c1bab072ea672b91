#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "morel/dynamics_model.hpp"
#include "morel/env_zoo.hpp"
#include "morel/planner.hpp"
#include "morel/pmdp.hpp"
#include "morel/usad.hpp"

namespace morel {

/// Absolute slack used by every bound check.
inline constexpr double kBoundSlack = 1e-8;

// ---------------------------------------------------------------------------
// Tabular pipeline

struct TabularPipelineConfig {
  enum class Detector { oracle, count, none };
  Detector detector = Detector::count;
  long n_min = 5;        // count detector
  double alpha = 0.1;    // oracle detector
  double kappa = -1.0;   // < 0 means r_max
  ViConfig vi;
};

struct TabularPipelineResult {
  TabularCountModel model;
  PairSet unknown;
  std::vector<double> rho0_hat;
  /// Pessimistic model (or the naive model for Detector::none, with halt = -1).
  TabularMdp planning_mdp;
  int halt = -1;
  double alpha_used = 0.0;  // exact max TV over known pairs (oracle detector)
  TabularPolicy policy;     // over the original states
  double eps_pi = 0.0;
  double J_model = 0.0;     // J(policy) in the planning model from rho0_hat
};

/// Fits counts, marks unknown pairs, builds the P-MDP and plans by value
/// iteration. `truth` supplies the known reward function, and the true
/// transitions for the oracle detector only.
TabularPipelineResult run_tabular_pipeline(const TabularMdp& truth, const OfflineDataset& dataset,
                                           const TabularPipelineConfig& config);

/// Collects `n` transitions with `behavior`, episodes of `episode_length`.
OfflineDataset collect_tabular(const TabularMdp& truth, const TabularPolicy& behavior, std::size_t n,
                               int episode_length, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Bound checks

struct BoundRecord {
  std::uint64_t seed = 0;
  double J_pmdp = 0.0;
  double J_true = 0.0;
  double dtv_rho0 = 0.0;
  double alpha_used = 0.0;
  double hitting_term = 0.0;
  double lower_bound_rhs = 0.0;
  double upper_bound_rhs = 0.0;
  double lower_slack = 0.0;  // J_pmdp - lower_bound_rhs
  double upper_slack = 0.0;  // upper_bound_rhs - J_pmdp
  double slack = 0.0;        // min of the two
  bool satisfied = false;
};

/// Both value bounds for `policy` (over the original states) with the P-MDP
/// built from the oracle detector's unknown set, alpha = its exact max TV
/// over known pairs.
BoundRecord check_value_bounds(const TabularMdp& mdp, const TabularCountModel& model,
                           const UsadOracle& usad, const std::vector<double>& rho0_hat,
                           const TabularPolicy& policy, double kappa);

struct SuboptimalityRecord {
  std::uint64_t seed = 0;
  double J_star = 0.0;
  double J_out = 0.0;
  double eps_pi = 0.0;
  double dtv_rho0 = 0.0;
  double alpha_used = 0.0;
  double hitting_star = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - (J_star - J_out)
  bool satisfied = false;
};

/// Plans in the oracle P-MDP and checks the suboptimality bound.
SuboptimalityRecord check_suboptimality_bound(const TabularMdp& mdp, const TabularCountModel& model,
                                 const UsadOracle& usad, const std::vector<double>& rho0_hat,
                                 double kappa, const ViConfig& vi = {});

struct HittingRecord {
  double lhs = 0.0;  // E[gamma^T]
  double rhs = 0.0;  // d(S) / (1 - gamma)
  bool satisfied = false;
};

HittingRecord check_hitting_bound(const TabularMdp& mdp, const TabularPolicy& policy, const PairSet& target);

// ---------------------------------------------------------------------------
// Finite-sample terms and improvement

struct SampleErrorTerms {
  double rho0_min = 0.0;
  double p_min = 0.0;
  double d_pib_min = 0.0;
  std::size_t n = 0;
  double delta = 0.1;
  double C = 1.0;
  double epsilon_n = 0.0;
};

/// Smallest non-zero entries and the finite-sample error term evaluated with
/// constant C. Reporting only; never used for pass/fail.
SampleErrorTerms sample_error_terms(const TabularMdp& mdp, const TabularPolicy& behavior,
                                    std::size_t n, double delta = 0.1, double C = 1.0);

struct ImprovementRow {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double J_behavior = 0.0;
  double J_out = 0.0;
  double gap = 0.0;  // J_behavior - J_out
  double eps_pi = 0.0;
  double epsilon_n = 0.0;
};

/// Runs the tabular pipeline for each (n, seed) and evaluates exactly.
std::vector<ImprovementRow> check_improvement(const TabularMdp& mdp, const TabularPolicy& behavior,
                                              const TabularPipelineConfig& config,
                                              const std::vector<std::size_t>& n_grid,
                                              const std::vector<std::uint64_t>& seeds,
                                              int episode_length);

// ---------------------------------------------------------------------------
// Counterexample

struct CounterexampleResult {
  double J_star = 0.0;
  double J_out = 0.0;
  double J_behavior = 0.0;
  double suboptimality = 0.0;
  double lower_bound_value = 0.0;
  double d_pistar_UD = 0.0;
  double max_suboptimality = 0.0;  // largest J* - J(pi) over all policies
  double epsilon = 0.0;
  std::size_t n_unknown = 0;
  bool coverage_ok = false;  // d_pistar_UD <= epsilon
  bool bound_ok = false;     // suboptimality >= lower_bound_value
};

/// Collects `n` transitions with the construction's behavior policy, runs the
/// pipeline with a visited-means-known detector and measures everything
/// exactly. U_D is the set of pairs absent from the dataset.
CounterexampleResult run_counterexample_experiment(const CounterexampleSpec& spec, std::size_t n,
                                                   int episode_length, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Random suites

struct RandomInstance {
  TabularMdp mdp;
  TabularPolicy behavior;
  OfflineDataset dataset;
  TabularCountModel model;
  std::vector<double> rho0_hat;
  double usad_alpha = 0.0;
  TabularPolicy policy;  // policy under test
};

/// |S| in [2, 10], |A| in [1, 4], 50..5000 transitions from a sparse random
/// behavior policy, random detector alpha. Pure function of the seed.
RandomInstance random_instance(std::uint64_t seed);

struct SuiteResult {
  std::vector<BoundRecord> value_bounds;
  std::vector<SuboptimalityRecord> suboptimality;
  std::vector<HittingRecord> hitting;
  int value_bound_failures = 0;
  int suboptimality_failures = 0;
  int hitting_failures = 0;
};

/// Value bounds and the suboptimality bound on `instances` random instances,
/// the hitting bound on `hitting_instances` random (MDP, policy, target) triples.
SuiteResult run_bound_suite(int instances, int hitting_instances, std::uint64_t seed);

void write_bound_csv(const std::vector<BoundRecord>& records, std::ostream& out);
void write_suboptimality_csv(const std::vector<SuboptimalityRecord>& records, std::ostream& out);

}  // namespace morel

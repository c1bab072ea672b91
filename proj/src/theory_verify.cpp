#include "morel/theory_verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace morel {

OfflineDataset collect_tabular(const TabularMdp& truth, const TabularPolicy& behavior, std::size_t n,
                               int episode_length, std::uint64_t seed) {
  const TabularEnv env(truth);
  CollectOptions options;
  options.episode_length = episode_length;
  return collect(env, Strategy::parse("Pure"), behavior, behavior, n, seed, options);
}

TabularPipelineResult run_tabular_pipeline(const TabularMdp& truth, const OfflineDataset& dataset,
                                           const TabularPipelineConfig& config) {
  const int S = truth.n_states();
  const int A = truth.n_actions();
  TabularPipelineResult out;
  out.model = fit_tabular(dataset, S, A);
  out.rho0_hat = empirical_rho0(dataset, S);
  const std::vector<double> rewards = reward_table(truth);
  const double kappa = config.kappa < 0.0 ? truth.r_max() : config.kappa;

  using Detector = TabularPipelineConfig::Detector;
  if (config.detector == Detector::none) {
    out.unknown = PairSet(S, A);
    out.planning_mdp = build_naive_tabular(out.model, rewards, out.rho0_hat, truth.gamma(), truth.r_max());
    const ViResult vi = value_iteration(out.planning_mdp, config.vi);
    out.policy = vi.policy;
    out.eps_pi = vi.certificate;
    out.J_model = exact_policy_value(out.planning_mdp, vi.policy).J;
    return out;
  }
  if (config.detector == Detector::oracle) {
    const UsadOracle oracle(truth, out.model, config.alpha);
    out.unknown = oracle.unknown_set();
    out.alpha_used = oracle.max_known_tv();
  } else {
    out.unknown = UsadCount(out.model, config.n_min).unknown_set();
  }
  PessimisticTabular p = build_tabular_pmdp(out.model, out.unknown, rewards, kappa, out.rho0_hat,
                                            truth.gamma(), truth.r_max());
  const ViResult vi = value_iteration(p.mdp, config.vi);
  out.policy = vi.policy.restricted(S);
  out.eps_pi = vi.certificate;
  out.J_model = exact_policy_value(p.mdp, vi.policy).J;
  out.halt = p.halt;
  out.planning_mdp = std::move(p.mdp);
  return out;
}

// ---------------------------------------------------------------------------

BoundRecord check_value_bounds(const TabularMdp& mdp, const TabularCountModel& model,
                           const UsadOracle& usad, const std::vector<double>& rho0_hat,
                           const TabularPolicy& policy, double kappa) {
  const int S = mdp.n_states();
  const PessimisticTabular p = build_tabular_pmdp(model, usad.unknown_set(), reward_table(mdp), kappa,
                                                  rho0_hat, mdp.gamma(), mdp.r_max());
  const double g = mdp.gamma();
  const double R = mdp.r_max();
  BoundRecord r;
  r.J_pmdp = exact_policy_value(p.mdp, policy.extended(S + 1)).J;
  r.J_true = exact_policy_value(mdp, policy).J;
  r.dtv_rho0 = tv_distance(mdp.rho0(), rho0_hat);
  r.alpha_used = usad.max_known_tv();
  r.hitting_term = expected_discounted_hitting(mdp, policy, usad.unknown_set());
  const double start = 2.0 * R / (1.0 - g) * r.dtv_rho0;
  const double fit = 2.0 * g * R / ((1.0 - g) * (1.0 - g)) * r.alpha_used;
  const double hit = 2.0 * R / (1.0 - g) * r.hitting_term;
  r.lower_bound_rhs = r.J_true - start - fit - hit;
  r.upper_bound_rhs = r.J_true + start + fit;
  r.lower_slack = r.J_pmdp - r.lower_bound_rhs;
  r.upper_slack = r.upper_bound_rhs - r.J_pmdp;
  r.slack = std::min(r.lower_slack, r.upper_slack);
  r.satisfied = r.lower_slack >= -kBoundSlack && r.upper_slack >= -kBoundSlack;
  return r;
}

SuboptimalityRecord check_suboptimality_bound(const TabularMdp& mdp, const TabularCountModel& model,
                                 const UsadOracle& usad, const std::vector<double>& rho0_hat,
                                 double kappa, const ViConfig& vi) {
  const int S = mdp.n_states();
  const PessimisticTabular p = build_tabular_pmdp(model, usad.unknown_set(), reward_table(mdp), kappa,
                                                  rho0_hat, mdp.gamma(), mdp.r_max());
  const ViResult plan = value_iteration(p.mdp, vi);
  const OptimalSolution opt = optimal_policy(mdp);
  const double g = mdp.gamma();
  const double R = mdp.r_max();
  SuboptimalityRecord c;
  c.J_star = opt.J;
  c.J_out = exact_policy_value(mdp, plan.policy.restricted(S)).J;
  c.eps_pi = plan.certificate;
  c.dtv_rho0 = tv_distance(mdp.rho0(), rho0_hat);
  c.alpha_used = usad.max_known_tv();
  c.hitting_star = expected_discounted_hitting(mdp, opt.policy, usad.unknown_set());
  c.rhs = c.eps_pi + 4.0 * R / (1.0 - g) * c.dtv_rho0 +
          4.0 * g * R / ((1.0 - g) * (1.0 - g)) * c.alpha_used +
          2.0 * R / (1.0 - g) * c.hitting_star;
  c.slack = c.rhs - (c.J_star - c.J_out);
  c.satisfied = c.slack >= -kBoundSlack;
  return c;
}

HittingRecord check_hitting_bound(const TabularMdp& mdp, const TabularPolicy& policy, const PairSet& target) {
  HittingRecord r;
  r.lhs = expected_discounted_hitting(mdp, policy, target);
  const Mat d = discounted_visitation(mdp, policy);
  double mass = 0.0;
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      if (target.contains(s, a)) mass += d(s, a);
    }
  }
  r.rhs = mass / (1.0 - mdp.gamma());
  r.satisfied = r.lhs <= r.rhs + 1e-10;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

double min_positive(double current, double x) { return x > 0.0 ? std::min(current, x) : current; }

}  // namespace

SampleErrorTerms sample_error_terms(const TabularMdp& mdp, const TabularPolicy& behavior,
                                    std::size_t n, double delta, double C) {
  if (n == 0) throw std::invalid_argument("sample_error_terms: n must be positive");
  constexpr double inf = std::numeric_limits<double>::infinity();
  SampleErrorTerms t;
  t.n = n;
  t.delta = delta;
  t.C = C;
  t.rho0_min = inf;
  for (double p : mdp.rho0()) t.rho0_min = min_positive(t.rho0_min, p);
  t.p_min = inf;
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      for (double p : mdp.transition(s, a)) t.p_min = min_positive(t.p_min, p);
    }
  }
  const Mat d = discounted_visitation(mdp, behavior);
  t.d_pib_min = inf;
  for (Eigen::Index i = 0; i < d.size(); ++i) t.d_pib_min = min_positive(t.d_pib_min, d.data()[i]);
  const double g = mdp.gamma();
  const double R = mdp.r_max();
  const double nn = static_cast<double>(n);
  t.epsilon_n = 4.0 * C * R / ((1.0 - g) * t.rho0_min) *
                    std::sqrt(std::log(1.0 / (delta * t.rho0_min)) / nn) +
                4.0 * C * g * R / ((1.0 - g) * (1.0 - g) * t.p_min) *
                    std::sqrt(std::log(1.0 / (delta * t.p_min * t.d_pib_min)) / (t.d_pib_min * nn));
  return t;
}

std::vector<ImprovementRow> check_improvement(const TabularMdp& mdp, const TabularPolicy& behavior,
                                              const TabularPipelineConfig& config,
                                              const std::vector<std::size_t>& n_grid,
                                              const std::vector<std::uint64_t>& seeds,
                                              int episode_length) {
  const double J_b = exact_policy_value(mdp, behavior).J;
  std::vector<ImprovementRow> rows;
  for (std::size_t n : n_grid) {
    const double eps_n = sample_error_terms(mdp, behavior, n).epsilon_n;
    for (std::uint64_t seed : seeds) {
      const OfflineDataset d = collect_tabular(mdp, behavior, n, episode_length, seed);
      const TabularPipelineResult res = run_tabular_pipeline(mdp, d, config);
      ImprovementRow row;
      row.n = n;
      row.seed = seed;
      row.J_behavior = J_b;
      row.J_out = exact_policy_value(mdp, res.policy).J;
      row.gap = J_b - row.J_out;
      row.eps_pi = res.eps_pi;
      row.epsilon_n = eps_n;
      rows.push_back(row);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------

CounterexampleResult run_counterexample_experiment(const CounterexampleSpec& spec, std::size_t n,
                                                   int episode_length, std::uint64_t seed) {
  const Counterexample ce = build_counterexample(spec);
  const OfflineDataset d = collect_tabular(ce.mdp, ce.behavior, n, episode_length, seed);
  TabularPipelineConfig config;
  config.detector = TabularPipelineConfig::Detector::count;
  config.n_min = 1;  // a pair is known iff it appears in the data
  config.vi.tolerance = 1e-10;
  const TabularPipelineResult res = run_tabular_pipeline(ce.mdp, d, config);

  CounterexampleResult r;
  r.epsilon = spec.epsilon;
  r.J_star = exact_policy_value(ce.mdp, ce.optimal).J;
  r.J_out = exact_policy_value(ce.mdp, res.policy).J;
  r.J_behavior = exact_policy_value(ce.mdp, ce.behavior).J;
  r.suboptimality = r.J_star - r.J_out;
  r.lower_bound_value = spec.lower_bound_value();
  const Mat dstar = discounted_visitation(ce.mdp, ce.optimal);
  for (int s = 0; s < ce.mdp.n_states(); ++s) {
    for (int a = 0; a < ce.mdp.n_actions(); ++a) {
      if (!res.model.visited(s, a)) {
        r.d_pistar_UD += dstar(s, a);
        ++r.n_unknown;
      }
    }
  }
  // the optimal policy except that it idles at state 0: collects nothing
  // from the start-0 branch and everything from state k
  std::vector<int> idle(ce.mdp.n_states());
  for (int s = 0; s < ce.mdp.n_states(); ++s) idle[s] = ce.optimal.greedy_action(s);
  idle[0] = 1;
  r.max_suboptimality = r.J_star - exact_policy_value(ce.mdp, TabularPolicy::deterministic(idle, 3)).J;
  r.coverage_ok = r.d_pistar_UD <= spec.epsilon;
  r.bound_ok = r.suboptimality >= r.lower_bound_value;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

TabularPolicy sparse_policy(Rng& rng, int S, int A, double zero_prob) {
  std::vector<double> probs(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    double total = 0.0;
    for (int a = 0; a < A; ++a) {
      double& p = probs[static_cast<std::size_t>(s) * A + a];
      p = rng.uniform() < zero_prob ? 0.0 : rng.exponential();
      total += p;
    }
    if (total == 0.0) {
      probs[static_cast<std::size_t>(s) * A + rng.below(A)] = 1.0;
      total = 1.0;
    }
    for (int a = 0; a < A; ++a) probs[static_cast<std::size_t>(s) * A + a] /= total;
  }
  return TabularPolicy::stochastic(S, A, std::move(probs));
}

}  // namespace

RandomInstance random_instance(std::uint64_t seed) {
  Rng rng = Rng(seed).split("instance");
  const int S = 2 + static_cast<int>(rng.below(9));
  const int A = 1 + static_cast<int>(rng.below(4));
  const double gamma = rng.uniform(0.5, 0.95);
  const double sparsity = rng.uniform(0.2, 0.9);
  RandomInstance inst;
  inst.mdp = random_tabular(S, A, sparsity, rng.next_u64(), gamma, 1.0);
  inst.behavior = sparse_policy(rng, S, A, 0.35);
  const auto n = static_cast<std::size_t>(
      std::llround(std::exp(rng.uniform(std::log(50.0), std::log(5000.0)))));
  const int episode_length = 3 + static_cast<int>(rng.below(30));
  inst.dataset = collect_tabular(inst.mdp, inst.behavior, n, episode_length, rng.next_u64());
  inst.model = fit_tabular(inst.dataset, S, A);
  inst.rho0_hat = empirical_rho0(inst.dataset, S);
  inst.usad_alpha = rng.uniform(0.02, 0.6);
  if (rng.uniform() < 0.5) {
    std::vector<int> actions(S);
    for (int& a : actions) a = static_cast<int>(rng.below(A));
    inst.policy = TabularPolicy::deterministic(actions, A);
  } else {
    inst.policy = sparse_policy(rng, S, A, 0.2);
  }
  return inst;
}

SuiteResult run_bound_suite(int instances, int hitting_instances, std::uint64_t seed) {
  SuiteResult out;
  const Rng root(seed);
  for (int i = 0; i < instances; ++i) {
    const std::uint64_t s = root.split("bounds").split(static_cast<std::uint64_t>(i)).key();
    const RandomInstance inst = random_instance(s);
    const UsadOracle usad(inst.mdp, inst.model, inst.usad_alpha);
    const double kappa = inst.mdp.r_max();
    BoundRecord b = check_value_bounds(inst.mdp, inst.model, usad, inst.rho0_hat, inst.policy, kappa);
    b.seed = s;
    out.value_bound_failures += !b.satisfied;
    out.value_bounds.push_back(b);
    SuboptimalityRecord c = check_suboptimality_bound(inst.mdp, inst.model, usad, inst.rho0_hat, kappa);
    c.seed = s;
    out.suboptimality_failures += !c.satisfied;
    out.suboptimality.push_back(c);
  }
  for (int i = 0; i < hitting_instances; ++i) {
    Rng rng = root.split("hitting").split(static_cast<std::uint64_t>(i));
    const int S = 1 + static_cast<int>(rng.below(10));
    const int A = 1 + static_cast<int>(rng.below(4));
    const TabularMdp mdp = random_tabular(S, A, rng.uniform(0.1, 1.0), rng.next_u64(),
                                          rng.uniform(0.3, 0.99));
    const TabularPolicy pi = sparse_policy(rng, S, A, 0.3);
    PairSet target(S, A);
    const double q = i % 50 == 0 ? 0.0 : i % 50 == 1 ? 1.0 : rng.uniform(0.0, 0.5);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        if (q == 1.0 || rng.uniform() < q) target.insert(s, a);
      }
    }
    const HittingRecord r = check_hitting_bound(mdp, pi, target);
    out.hitting_failures += !r.satisfied;
    out.hitting.push_back(r);
  }
  return out;
}

void write_bound_csv(const std::vector<BoundRecord>& records, std::ostream& out) {
  out << "instance,seed,J_pmdp,J_true,dtv_rho0,alpha_used,hitting_term,lower_bound_rhs,"
         "upper_bound_rhs,lower_slack,upper_slack,slack,satisfied\n";
  char buf[512];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const BoundRecord& r = records[i];
    std::snprintf(buf, sizeof(buf), "%zu,%llu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n",
                  i, static_cast<unsigned long long>(r.seed), r.J_pmdp, r.J_true, r.dtv_rho0,
                  r.alpha_used, r.hitting_term, r.lower_bound_rhs, r.upper_bound_rhs, r.lower_slack,
                  r.upper_slack, r.slack, r.satisfied ? 1 : 0);
    out << buf;
  }
}

void write_suboptimality_csv(const std::vector<SuboptimalityRecord>& records, std::ostream& out) {
  out << "instance,seed,J_star,J_out,eps_pi,dtv_rho0,alpha_used,hitting_star,rhs,slack,satisfied\n";
  char buf[512];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SuboptimalityRecord& r = records[i];
    std::snprintf(buf, sizeof(buf), "%zu,%llu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n", i,
                  static_cast<unsigned long long>(r.seed), r.J_star, r.J_out, r.eps_pi, r.dtv_rho0,
                  r.alpha_used, r.hitting_star, r.rhs, r.slack, r.satisfied ? 1 : 0);
    out << buf;
  }
}

}  // namespace morel

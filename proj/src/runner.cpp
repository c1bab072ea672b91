#include "morel/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "morel/dynamics_model.hpp"
#include "morel/env_zoo.hpp"
#include "morel/planner.hpp"
#include "morel/pmdp.hpp"
#include "morel/theory_verify.hpp"
#include "morel/usad.hpp"

namespace morel {

namespace fs = std::filesystem;
using json = nlohmann::json;

double value_range(double r_max, double gamma, int horizon) {
  return 2.0 * r_max * (1.0 - std::pow(gamma, horizon)) / (1.0 - gamma);
}

std::string resolve_output_dir(const RunConfig& config) {
  const std::string& dir = config.get("output.dir");
  if (dir != "auto") return dir;
  const char* root = std::getenv("MOREL_OUTPUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::current_path();
  const std::string& experiment = config.get("experiment");
  const bool env_free = experiment == "theory-suite" || experiment == "counterexample";
  const std::string env = env_free ? "" : "-" + config.get("env.kind");
  return (base / (experiment + env + "-s" + config.get("seed"))).string();
}

namespace {

/// Names the pipeline stage for failure reports.
struct Stage {
  std::string name = "setup";
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

bool is_tabular(const RunConfig& c) {
  const std::string& k = c.get("env.kind");
  return k == "chain" || k == "grid";
}

std::uint64_t dataset_seed(const RunConfig& c) {
  const std::int64_t s = c.get_int("dataset.seed");
  return s < 0 ? c.get_uint("seed") : static_cast<std::uint64_t>(s);
}

json calibration_json(const Calibration& c) {
  return {{"mu_d", c.mu_d},     {"sigma_d", c.sigma_d},     {"m_d", c.m_d},
          {"beta", c.beta},     {"beta_max", c.beta_max},   {"threshold", c.threshold},
          {"warnings", c.warnings}};
}

json curve_summary(const std::vector<CurveRow>& curve, double range) {
  int over = 0;
  double worst = -INFINITY;
  for (const CurveRow& r : curve) {
    const double excess = r.pmdp_value - r.true_value;
    worst = std::max(worst, excess);
    if (excess > 0.1 * range) ++over;
  }
  const CurveRow& last = curve.back();
  return {{"J_pmdp_final", last.pmdp_value},
          {"J_true_final", last.true_value},
          {"J_pmdp_initial", curve.front().pmdp_value},
          {"J_true_initial", curve.front().true_value},
          {"frac_halted_final", last.frac_rollouts_halted},
          {"iterations", static_cast<int>(curve.size()) - 1},
          {"value_range", range},
          {"rows_overestimating", over},
          {"max_overestimate", worst}};
}

std::string curve_csv(const std::vector<CurveRow>& curve) {
  std::ostringstream out;
  write_curve_csv(curve, out);
  return out.str();
}

// ---------------------------------------------------------------------------
// Continuous pipeline

struct ContinuousData {
  std::unique_ptr<ContinuousTask> task;
  OfflineDataset dataset;
  double behavior_value = 0.0;
};

ContinuousData prepare_dataset(const RunConfig& c, const std::string& behavior, std::uint64_t seed,
                               Stage& stage) {
  stage.name = "dataset";
  ContinuousData d;
  ContinuousTaskSpec spec;
  spec.kind = c.get("env.kind");
  d.task = build_continuous_task(spec);
  if (behavior == "uniform") throw std::invalid_argument("behavior 'uniform' is for tabular tasks");
  const auto pi_b = d.task->behavior_policy(behavior);
  const auto random = d.task->behavior_policy("random");
  if (!c.get("dataset.path").empty()) {
    d.dataset = load_dataset(c.get("dataset.path"));
    if (d.dataset.meta.env != d.task->id()) {
      throw std::runtime_error("dataset was collected on '" + d.dataset.meta.env + "', not '" +
                               d.task->id() + "'");
    }
  } else {
    CollectOptions opt;
    opt.episode_length = static_cast<int>(c.get_int("dataset.episode_length"));
    opt.behavior_name = behavior;
    d.dataset = collect(*d.task, Strategy::parse(c.get("dataset.strategy")), *pi_b, *random,
                        c.get_uint("dataset.n"), seed, opt);
  }
  d.dataset.validate();
  d.behavior_value = monte_carlo_value(*d.task, *pi_b, 100, Rng(seed).split("behavior-eval").key()).mean;
  return d;
}

DynamicsEnsemble fit_models(const RunConfig& c, const OfflineDataset& dataset, std::uint64_t seed,
                            FitReport& report, Stage& stage) {
  stage.name = "model";
  EnsembleConfig e;
  e.layers = static_cast<int>(c.get_int("model.layers"));
  e.width = static_cast<int>(c.get_int("model.width"));
  e.epochs = static_cast<int>(c.get_int("model.epochs"));
  e.step_size = c.get_real("model.step_size");
  e.batch_size = static_cast<int>(c.get_int("model.batch_size"));
  e.K = static_cast<int>(c.get_int("model.K"));
  e.holdout = c.get_real("model.holdout");
  e.noise_scale = c.get_real("model.noise_scale");
  e.seed = seed;
  return fit_ensemble(dataset, e, &report);
}

GaussianMlpPolicy initial_policy(const RunConfig& c, const OfflineDataset& dataset, std::uint64_t seed,
                                 Stage& stage) {
  stage.name = "behavior-clone";
  BcConfig bc;
  bc.hidden = c.get_int_list("bc.hidden");
  bc.epochs = static_cast<int>(c.get_int("bc.epochs"));
  bc.lr = c.get_real("bc.lr");
  bc.batch_size = static_cast<int>(c.get_int("bc.batch_size"));
  bc.log_std_min = c.get_real("planner.log_sigma_min");
  bc.seed = seed;
  GaussianMlpPolicy pi = behavior_clone(dataset, bc);
  // the cloned spread is the data's; planning starts from a fixed exploration level
  pi.set_log_std(Vec::Constant(pi.action_dim(), c.get_real("planner.log_sigma_init")));
  return pi;
}

struct PlanOutput {
  TrainResult train;
  Calibration calibration;
  double kappa = 0.0;
  std::size_t nonfinite = 0;
};

PlanOutput plan(const RunConfig& c, const ContinuousTask& task, const DynamicsEnsemble& ensemble,
                const OfflineDataset& dataset, const GaussianMlpPolicy& start, bool naive,
                double beta, std::uint64_t seed, const std::string& label, std::ostream& log,
                Stage& stage) {
  stage.name = "calibrate";
  PlanOutput out;
  const UsadEnsemble calibrated = calibrate_threshold(ensemble, dataset, beta);
  out.calibration = calibrated.calibration();
  for (const std::string& w : out.calibration.warnings) log << "[" << label << "] warning: " << w << '\n';
  const UsadEnsemble usad = naive ? UsadEnsemble::disabled(ensemble) : calibrated;

  PessimisticRolloutConfig pc;
  out.kappa = c.get("pmdp.kappa_mode") == "theory"
                  ? task.r_max()
                  : default_kappa(dataset, c.get_real("pmdp.kappa_offset"));
  pc.kappa = out.kappa;
  pc.halt_mode = parse_halt_mode(c.get("pmdp.halt_mode"));
  pc.member_mode = parse_member_mode(c.get("pmdp.member_mode"));
  const PessimisticRollout sim(task, usad, StartSampler(dataset), pc);

  NpgConfig npg;
  npg.n_updates = static_cast<int>(c.get_int("planner.n_updates"));
  npg.n_traj = static_cast<int>(c.get_int("planner.n_traj"));
  npg.horizon = static_cast<int>(c.get_int("planner.horizon"));
  npg.cg_iters = static_cast<int>(c.get_int("planner.cg_iters"));
  npg.cg_damping = c.get_real("planner.cg_damping");
  npg.step_size = c.get_real("planner.step_size");
  npg.eval_traj = static_cast<int>(c.get_int("planner.eval_traj"));
  npg.seed = seed;

  stage.name = "planner";
  out.train = train_npg(sim, task, start, npg, [&](const CurveRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "[%s] it %d/%d pmdp %.4f true %.4f halted %.2f kl %.3g\n",
                  label.c_str(), r.iteration, npg.n_updates, r.pmdp_value, r.true_value,
                  r.frac_rollouts_halted, r.kl_step);
    log << buf << std::flush;
  });
  out.nonfinite = sim.nonfinite_steps();
  return out;
}

void save_models(const fs::path& dir, const DynamicsEnsemble& ensemble, std::uint64_t seed) {
  fs::create_directories(dir / "checkpoints");
  for (int k = 0; k < ensemble.size(); ++k) {
    std::ostringstream out;
    save_checkpoint(ensemble.member(k), out, seed);
    write_file(dir / "checkpoints" / ("member-" + std::to_string(k) + ".txt"), out.str());
  }
}

std::string policy_text(const GaussianMlpPolicy& pi) {
  std::ostringstream out;
  save_policy(pi, out);
  return out.str();
}

json fit_json(const FitReport& report) {
  json members = json::array();
  for (const MemberLog& m : report.members) {
    members.push_back({{"initial_holdout_mse", m.initial_holdout_mse},
                       {"final_holdout_mse", m.final_holdout_mse}});
  }
  return members;
}

json run_continuous(const RunConfig& c, const fs::path& dir, std::ostream& log, Stage& stage) {
  const bool naive = c.get("experiment") == "naive-mbrl";
  const std::uint64_t seed = c.get_uint("seed");
  ContinuousData data = prepare_dataset(c, c.get("dataset.behavior"), dataset_seed(c), stage);
  save(data.dataset, (dir / "dataset.txt").string());
  FitReport fit;
  const DynamicsEnsemble ensemble = fit_models(c, data.dataset, seed, fit, stage);
  save_models(dir, ensemble, seed);
  const GaussianMlpPolicy start = initial_policy(c, data.dataset, seed, stage);
  const PlanOutput p = plan(c, *data.task, ensemble, data.dataset, start, naive,
                            c.get_real("usad.beta"), seed, c.get("experiment"), log, stage);

  stage.name = "write";
  json calib = calibration_json(p.calibration);
  calib["enabled"] = !naive;
  calib["kappa"] = p.kappa;
  calib["members"] = fit_json(fit);
  write_json(dir / "calibration.json", calib);
  write_file(dir / "curve.csv", curve_csv(p.train.curve));
  write_file(dir / "policy.txt", policy_text(p.train.policy));

  const Environment& task = *data.task;
  json summary = curve_summary(p.train.curve, value_range(task.r_max(), task.gamma(), task.horizon()));
  summary["J_behavior"] = data.behavior_value;
  summary["dataset_size"] = data.dataset.size();
  summary["kappa"] = p.kappa;
  summary["threshold"] = naive ? INFINITY : p.calibration.threshold;
  summary["cg_fallbacks"] = p.train.cg_fallbacks;
  summary["nonfinite_steps"] = p.nonfinite;
  return summary;
}

json run_ablation(const RunConfig& c, const fs::path& dir, std::ostream& log, Stage& stage) {
  const std::uint64_t seed = c.get_uint("seed");
  ContinuousData data = prepare_dataset(c, c.get("dataset.behavior"), dataset_seed(c), stage);
  save(data.dataset, (dir / "dataset.txt").string());
  FitReport fit;
  const DynamicsEnsemble ensemble = fit_models(c, data.dataset, seed, fit, stage);
  save_models(dir, ensemble, seed);
  const GaussianMlpPolicy start = initial_policy(c, data.dataset, seed, stage);
  const Environment& task = *data.task;
  const double range = value_range(task.r_max(), task.gamma(), task.horizon());

  std::ostringstream table;
  table << "beta,threshold,J_pmdp_final,J_true_final,frac_halted_final,rows_overestimating\n";
  json runs = json::array();
  for (double beta : c.get_real_list("ablation.betas")) {
    const std::string tag = "beta-" + num(beta);
    const PlanOutput p = plan(c, *data.task, ensemble, data.dataset, start, false, beta, seed, tag, log, stage);
    stage.name = "write";
    write_file(dir / ("curve-" + tag + ".csv"), curve_csv(p.train.curve));
    json s = curve_summary(p.train.curve, range);
    s["beta"] = beta;
    s["threshold"] = p.calibration.threshold;
    table << num(beta) << ',' << num(p.calibration.threshold) << ',' << num(s["J_pmdp_final"])
          << ',' << num(s["J_true_final"]) << ',' << num(s["frac_halted_final"]) << ','
          << s["rows_overestimating"].get<int>() << '\n';
    runs.push_back(std::move(s));
  }
  write_file(dir / "ablation.csv", table.str());
  return {{"runs", runs}, {"J_behavior", data.behavior_value}, {"value_range", range}};
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

json run_quality(const RunConfig& c, const fs::path& dir, std::ostream& log, Stage& stage) {
  const std::uint64_t base = c.get_uint("seed");
  const int n_seeds = static_cast<int>(c.get_int("quality.seeds"));
  if (n_seeds < 1) throw std::invalid_argument("quality.seeds must be >= 1");
  std::ostringstream table;
  table << "behavior,seed,J_behavior,J_pmdp_final,J_true_final,frac_halted_final\n";
  json medians = json::object();
  for (const std::string& behavior : c.get_string_list("quality.behaviors")) {
    std::vector<double> finals;
    for (int i = 0; i < n_seeds; ++i) {
      const std::uint64_t seed = base + static_cast<std::uint64_t>(i);
      ContinuousData data = prepare_dataset(c, behavior, seed, stage);
      FitReport fit;
      const DynamicsEnsemble ensemble = fit_models(c, data.dataset, seed, fit, stage);
      const GaussianMlpPolicy start = initial_policy(c, data.dataset, seed, stage);
      const std::string tag = behavior + "-s" + std::to_string(seed);
      const PlanOutput p = plan(c, *data.task, ensemble, data.dataset, start, false,
                                c.get_real("usad.beta"), seed, tag, log, stage);
      stage.name = "write";
      write_file(dir / ("curve-" + tag + ".csv"), curve_csv(p.train.curve));
      const CurveRow& last = p.train.curve.back();
      finals.push_back(last.true_value);
      table << behavior << ',' << seed << ',' << num(data.behavior_value) << ','
            << num(last.pmdp_value) << ',' << num(last.true_value) << ','
            << num(last.frac_rollouts_halted) << '\n';
    }
    medians[behavior] = median(finals);
  }
  write_file(dir / "quality.csv", table.str());
  return {{"median_J_true_final", medians}, {"seeds", n_seeds}};
}

// ---------------------------------------------------------------------------
// Tabular pipeline

TabularPolicy tabular_behavior(const TabularMdp& mdp, const std::string& name) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  if (name == "uniform" || name == "random") return TabularPolicy::uniform(S, A);
  // partial: optimal action half the time, uniform otherwise
  const TabularPolicy best = optimal_policy(mdp).policy;
  std::vector<double> probs(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) probs[s * A + a] = 0.5 * best.prob(s, a) + 0.5 / A;
  }
  return TabularPolicy::stochastic(S, A, std::move(probs));
}

json run_tabular(const RunConfig& c, const fs::path& dir, Stage& stage) {
  stage.name = "dataset";
  const bool naive = c.get("experiment") == "naive-mbrl";
  const TabularMdp mdp = c.get("env.kind") == "chain" ? build_chain({}) : build_grid({});
  const TabularPolicy behavior = tabular_behavior(mdp, c.get("dataset.behavior"));
  const int length = c.get_int("dataset.episode_length") > 0
                         ? static_cast<int>(c.get_int("dataset.episode_length"))
                         : 30;
  const OfflineDataset dataset = c.get("dataset.path").empty()
                                     ? collect_tabular(mdp, behavior, c.get_uint("dataset.n"), length,
                                                       dataset_seed(c))
                                     : load_dataset(c.get("dataset.path"));
  save(dataset, (dir / "dataset.txt").string());

  stage.name = "planner";
  TabularPipelineConfig pc;
  pc.detector = naive                                  ? TabularPipelineConfig::Detector::none
                : c.get("usad.tabular") == "oracle" ? TabularPipelineConfig::Detector::oracle
                                                     : TabularPipelineConfig::Detector::count;
  pc.n_min = c.get_int("usad.n_min");
  pc.alpha = c.get_real("usad.alpha");
  pc.kappa = c.get("pmdp.kappa_mode") == "theory" ? -1.0
                                                  : default_kappa(dataset, c.get_real("pmdp.kappa_offset"));
  pc.vi.tolerance = c.get_real("planner.vi_tolerance");
  const TabularPipelineResult r = run_tabular_pipeline(mdp, dataset, pc);

  stage.name = "write";
  CurveRow row;
  row.pmdp_value = r.J_model;
  row.true_value = exact_policy_value(mdp, r.policy).J;
  write_file(dir / "curve.csv", curve_csv({row}));
  std::ostringstream pol;
  pol << "tabular-policy " << r.policy.n_states() << ' ' << r.policy.n_actions() << '\n';
  for (int s = 0; s < r.policy.n_states(); ++s) {
    for (int a = 0; a < r.policy.n_actions(); ++a) pol << (a ? " " : "") << num(r.policy.prob(s, a));
    pol << '\n';
  }
  write_file(dir / "policy.txt", pol.str());
  write_json(dir / "calibration.json", {{"detector", naive ? "none" : c.get("usad.tabular")},
                                        {"n_unknown", r.unknown.size()},
                                        {"alpha_used", r.alpha_used},
                                        {"n_min", pc.n_min},
                                        {"halt_state", r.halt}});
  json summary = curve_summary({row}, 2.0 * mdp.r_max() / (1.0 - mdp.gamma()));
  summary["J_behavior"] = exact_policy_value(mdp, behavior).J;
  summary["J_optimal"] = optimal_policy(mdp).J;
  summary["eps_pi"] = r.eps_pi;
  summary["dataset_size"] = dataset.size();
  return summary;
}

// ---------------------------------------------------------------------------
// Theory

std::string hitting_csv(const std::vector<HittingRecord>& records) {
  std::ostringstream out;
  out << "index,lhs,rhs,satisfied\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << i << ',' << num(records[i].lhs) << ',' << num(records[i].rhs) << ','
        << (records[i].satisfied ? 1 : 0) << '\n';
  }
  return out.str();
}

json run_theory(const RunConfig& c, const fs::path& dir, std::ostream& log, Stage& stage, bool& violation) {
  stage.name = "bound-suite";
  const SuiteResult suite = run_bound_suite(static_cast<int>(c.get_int("theory.instances")),
                                            static_cast<int>(c.get_int("theory.hitting_instances")),
                                            c.get_uint("seed"));
  std::ostringstream t1, c1;
  write_bound_csv(suite.value_bounds, t1);
  write_suboptimality_csv(suite.suboptimality, c1);
  write_file(dir / "value_bounds.csv", t1.str());
  write_file(dir / "suboptimality.csv", c1.str());
  write_file(dir / "hitting.csv", hitting_csv(suite.hitting));
  log << "value bounds " << suite.value_bounds.size() - suite.value_bound_failures << "/" << suite.value_bounds.size()
      << ", suboptimality " << suite.suboptimality.size() - suite.suboptimality_failures << "/"
      << suite.suboptimality.size() << ", hitting " << suite.hitting.size() - suite.hitting_failures << "/"
      << suite.hitting.size() << " hold\n";

  stage.name = "improvement";
  const TabularMdp chain = build_chain({});
  const TabularPolicy pib = TabularPolicy::stochastic(5, 2, {0.3, 0.7, 0.3, 0.7, 0.3, 0.7, 0.3, 0.7, 0.3, 0.7});
  std::vector<std::size_t> ns;
  for (int n : c.get_int_list("theory.improvement_n")) ns.push_back(static_cast<std::size_t>(n));
  std::vector<std::uint64_t> seeds;
  for (int s = 1; s <= c.get_int("theory.improvement_seeds"); ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  TabularPipelineConfig pc;
  const std::vector<ImprovementRow> rows = check_improvement(chain, pib, pc, ns, seeds, 30);
  const double tol = 0.01 * chain.r_max() / (1.0 - chain.gamma());
  std::ostringstream imp;
  imp << "n,seed,J_behavior,J_out,gap,eps_pi,epsilon_n,within_tolerance\n";
  int within = 0;
  for (const ImprovementRow& r : rows) {
    const bool ok = r.gap <= r.eps_pi + tol;
    within += ok;
    imp << r.n << ',' << r.seed << ',' << num(r.J_behavior) << ',' << num(r.J_out) << ','
        << num(r.gap) << ',' << num(r.eps_pi) << ',' << num(r.epsilon_n) << ',' << (ok ? 1 : 0) << '\n';
  }
  write_file(dir / "improvement.csv", imp.str());

  violation = suite.value_bound_failures + suite.suboptimality_failures + suite.hitting_failures > 0;
  return {{"value_bound_failures", suite.value_bound_failures},
          {"suboptimality_failures", suite.suboptimality_failures},
          {"hitting_failures", suite.hitting_failures},
          {"instances", suite.value_bounds.size()},
          {"hitting_instances", suite.hitting.size()},
          {"improvement_rows", rows.size()},
          {"improvement_within_tolerance", within}};
}

json run_counterexample(const RunConfig& c, Stage& stage) {
  stage.name = "counterexample";
  CounterexampleSpec spec;
  spec.gamma = c.get_real("counterexample.gamma");
  spec.epsilon = c.get_real("counterexample.epsilon");
  spec.r_max = c.get_real("counterexample.r_max");
  const CounterexampleResult r = run_counterexample_experiment(
      spec, c.get_uint("counterexample.n"), static_cast<int>(c.get_int("counterexample.episode_length")),
      c.get_uint("seed"));
  return {{"J_star", r.J_star},
          {"J_out", r.J_out},
          {"J_behavior", r.J_behavior},
          {"suboptimality", r.suboptimality},
          {"lower_bound_value", r.lower_bound_value},
          {"max_suboptimality", r.max_suboptimality},
          {"d_pistar_unknown", r.d_pistar_UD},
          {"epsilon", r.epsilon},
          {"n_unknown", r.n_unknown},
          {"coverage_ok", r.coverage_ok},
          {"bound_ok", r.bound_ok}};
}

}  // namespace

RunOutcome run_experiment(const RunConfig& config, std::ostream& log) {
  RunOutcome outcome;
  outcome.output_dir = resolve_output_dir(config);
  const fs::path dir(outcome.output_dir);
  fs::create_directories(dir);
  write_file(dir / "config.resolved", config.resolved());
  fs::remove(dir / "failure.json");

  Stage stage;
  const std::string experiment = config.get("experiment");
  try {
    json summary;
    if (experiment == "theory-suite") {
      summary = run_theory(config, dir, log, stage, outcome.violation);
    } else if (experiment == "counterexample") {
      summary = run_counterexample(config, stage);
    } else if (is_tabular(config)) {
      if (experiment != "morel" && experiment != "naive-mbrl") {
        throw std::invalid_argument(experiment + " needs a continuous env.kind");
      }
      summary = run_tabular(config, dir, stage);
    } else if (experiment == "ablation-beta") {
      summary = run_ablation(config, dir, log, stage);
    } else if (experiment == "dataset-quality") {
      summary = run_quality(config, dir, log, stage);
    } else {
      summary = run_continuous(config, dir, log, stage);
    }
    stage.name = "write";
    summary["experiment"] = experiment;
    summary["env"] = config.get("env.kind");
    summary["seed"] = config.get_uint("seed");
    summary["violation"] = outcome.violation;
    write_json(dir / "summary.json", summary);
    outcome.summary = std::move(summary);
  } catch (const std::exception& e) {
    try {
      write_json(dir / "failure.json", {{"stage", stage.name}, {"error", e.what()}});
    } catch (const std::exception&) {
    }
    throw RunFailure(stage.name, e.what());
  }
  return outcome;
}

}  // namespace morel

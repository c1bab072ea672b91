#include "morel/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace morel {

ViResult value_iteration(const TabularMdp& mdp, const ViConfig& config) {
  if (!(config.tolerance > 0.0)) throw std::invalid_argument("value_iteration: tolerance must be > 0");
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const double g = mdp.gamma();
  Vec v = Vec::Zero(S), next(S);
  std::vector<int> greedy(S, 0);
  ViResult out;
  out.certificate = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= config.max_iters; ++it) {
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double q = 0.0;
        const auto row = mdp.transition(s, a);
        for (int n = 0; n < S; ++n) q += row[n] * v[n];
        q = mdp.reward(s, a) + g * q;
        if (q > best) {
          best = q;
          greedy[s] = a;
        }
      }
      next[s] = best;
    }
    const double change = (next - v).lpNorm<Eigen::Infinity>();
    v.swap(next);
    out.iterations = it;
    out.certificate = g == 0.0 ? 0.0 : 2.0 * g * change / (1.0 - g);
    if (out.certificate <= config.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.values = v;
  out.policy = TabularPolicy::deterministic(greedy, A);
  return out;
}

TabularPolicy behavior_clone_tabular(const OfflineDataset& dataset, int n_states, int n_actions) {
  if (dataset.transitions.empty()) throw std::invalid_argument("behavior_clone: empty dataset");
  std::vector<double> counts(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  for (const Transition& tr : dataset.transitions) {
    const int s = as_index(tr.s);
    const int a = as_index(tr.a);
    if (s < 0 || s >= n_states || a < 0 || a >= n_actions) {
      throw std::invalid_argument("behavior_clone: transition out of range");
    }
    counts[static_cast<std::size_t>(s) * n_actions + a] += 1.0;
  }
  for (int s = 0; s < n_states; ++s) {
    double total = 0.0;
    for (int a = 0; a < n_actions; ++a) total += counts[s * n_actions + a];
    for (int a = 0; a < n_actions; ++a) {
      double& p = counts[s * n_actions + a];
      p = total > 0.0 ? p / total : 1.0 / n_actions;
    }
  }
  return TabularPolicy::stochastic(n_states, n_actions, std::move(counts));
}

GaussianMlpPolicy behavior_clone(const OfflineDataset& dataset, const BcConfig& config,
                                 BcReport* report) {
  if (dataset.transitions.empty()) throw std::invalid_argument("behavior_clone: empty dataset");
  if (config.batch_size < 1 || config.epochs < 0) {
    throw std::invalid_argument("behavior_clone: invalid schedule");
  }
  const NormStats stats = compute_stats(dataset);
  const int ds = static_cast<int>(stats.mu_s.size());
  const int da = static_cast<int>(stats.mu_a.size());
  GaussianMlpPolicy policy(ds, da, config.hidden, config.log_std_init, config.log_std_min);
  policy.set_input_normalization(stats.mu_s, stats.sigma_s);
  const Rng root = Rng(config.seed).split("behavior-clone");
  Rng init = root.split("init");
  policy.init(init);

  const auto n = static_cast<Eigen::Index>(dataset.size());
  Mat S(ds, n), A(da, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    S.col(i) = dataset.transitions[static_cast<std::size_t>(i)].s;
    A.col(i) = dataset.transitions[static_cast<std::size_t>(i)].a;
  }
  if (report) report->epoch_nll.clear();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  AdamState adam;
  const AdamConfig adam_config{config.lr};
  Mat sb, ab;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle = root.split("batches").split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double nll = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index m = std::min<Eigen::Index>(config.batch_size, n - start);
      sb.resize(ds, m);
      ab.resize(da, m);
      for (Eigen::Index j = 0; j < m; ++j) {
        sb.col(j) = S.col(order[static_cast<std::size_t>(start + j)]);
        ab.col(j) = A.col(order[static_cast<std::size_t>(start + j)]);
      }
      nll -= policy.log_prob(sb, ab).sum();
      // Adam minimizes, so descend the mean negative log-likelihood
      const Vec grad = -policy.weighted_score(sb, ab, Vec::Constant(m, 1.0 / m));
      Vec theta = policy.params();
      adam_step(theta, grad, adam, adam_config);
      policy.set_params(theta);
    }
    if (report) report->epoch_nll.push_back(nll / static_cast<double>(n));
  }
  return policy;
}

SampleBatch sample_batch(const Environment& env, const Policy& policy, int n_traj, int horizon,
                         const Rng& rng) {
  if (n_traj < 1 || horizon < 1) throw std::invalid_argument("sample_batch: need n_traj, horizon >= 1");
  const double g = env.gamma();
  std::vector<Vec> states, actions;
  std::vector<double> rtg;
  std::vector<int> steps;
  double total_return = 0.0;
  int halted = 0;
  for (int i = 0; i < n_traj; ++i) {
    Rng r = rng.split(static_cast<std::uint64_t>(i));
    const auto episode = static_cast<std::size_t>(i);
    Vec s = env.reset(r, episode);
    std::vector<double> rewards;
    for (int t = 0; t < horizon; ++t) {
      Vec a = policy.act(s, r);
      StepResult step = env.step(s, env.clip_action(a), r, episode);
      if (!step.next_state.allFinite() || !std::isfinite(step.reward)) {
        throw std::runtime_error("sample_batch: non-finite state or reward at trajectory " +
                                 std::to_string(i) + ", step " + std::to_string(t));
      }
      states.push_back(std::move(s));
      actions.push_back(std::move(a));
      rewards.push_back(step.reward);
      s = std::move(step.next_state);
      if (step.halted) ++halted;
      if (step.done || step.halted) break;
    }
    std::vector<double> tail(rewards.size());
    double acc = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) tail[t] = acc = rewards[t] + g * acc;
    total_return += acc;
    rtg.insert(rtg.end(), tail.begin(), tail.end());
    for (std::size_t t = 0; t < tail.size(); ++t) steps.push_back(static_cast<int>(t));
  }
  SampleBatch b;
  const auto n = static_cast<Eigen::Index>(states.size());
  b.states.resize(env.state_dim(), n);
  b.actions.resize(actions.front().size(), n);
  b.returns_to_go.resize(n);
  b.timesteps.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.states.col(i) = states[static_cast<std::size_t>(i)];
    b.actions.col(i) = actions[static_cast<std::size_t>(i)];
    b.returns_to_go[i] = rtg[static_cast<std::size_t>(i)];
    b.timesteps[i] = steps[static_cast<std::size_t>(i)];
  }
  b.n_traj = n_traj;
  b.mean_return = total_return / n_traj;
  b.frac_halted = static_cast<double>(halted) / n_traj;
  return b;
}

Vec normalize_advantages(const Vec& returns_to_go) {
  const double n = static_cast<double>(returns_to_go.size());
  if (n == 0) return returns_to_go;
  const double mean = returns_to_go.mean();
  const Vec centered = returns_to_go.array() - mean;
  const double sd = std::sqrt(centered.squaredNorm() / n);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return Vec::Zero(returns_to_go.size());
  return centered / sd;
}

Vec time_baseline(const Vec& returns_to_go, const Eigen::VectorXi& timesteps) {
  if (returns_to_go.size() != timesteps.size()) throw std::invalid_argument("time_baseline: size mismatch");
  const int T = timesteps.size() ? timesteps.maxCoeff() + 1 : 0;
  std::vector<double> sum(T, 0.0);
  std::vector<int> count(T, 0);
  for (Eigen::Index i = 0; i < timesteps.size(); ++i) {
    sum[timesteps[i]] += returns_to_go[i];
    ++count[timesteps[i]];
  }
  Vec out(returns_to_go.size());
  for (Eigen::Index i = 0; i < timesteps.size(); ++i) {
    out[i] = returns_to_go[i] - sum[timesteps[i]] / count[timesteps[i]];
  }
  return out;
}

Vec fisher_vector_product(const Mat& scores, const Vec& v) {
  return scores * (scores.transpose() * v) / static_cast<double>(scores.cols());
}

CgResult conjugate_gradient(const std::function<Vec(const Vec&)>& apply, const Vec& b, int iters,
                            double residual_tol) {
  CgResult out;
  out.x = Vec::Zero(b.size());
  Vec r = b;
  Vec p = r;
  double rs = r.squaredNorm();
  const double stop = residual_tol * residual_tol * rs;
  // residuals are kept mutually orthogonal explicitly; plain CG loses this
  // in floating point on badly conditioned Fisher matrices
  std::vector<Vec> basis;
  for (int i = 0; i < iters && rs > stop; ++i) {
    basis.push_back(r / std::sqrt(rs));
    const Vec ap = apply(p);
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0)) {
      out.breakdown = true;
      break;
    }
    const double alpha = rs / curvature;
    out.x += alpha * p;
    r -= alpha * ap;
    for (const Vec& q : basis) r -= q.dot(r) * q;
    const double rs_next = r.squaredNorm();
    p = r + (rs_next / rs) * p;
    rs = rs_next;
    out.iterations = i + 1;
  }
  return out;
}

NpgDiagnostics npg_step(GaussianMlpPolicy& policy, const Mat& states, const Mat& actions,
                        const Vec& advantages, const NpgConfig& config) {
  if (!(config.cg_damping > 0.0) || !(config.step_size > 0.0)) {
    throw std::invalid_argument("npg_step: cg_damping and step_size must be > 0");
  }
  const Mat G = policy.score(states, actions);
  const auto n = static_cast<double>(states.cols());
  const Vec g = G * advantages / n;
  NpgDiagnostics d;
  d.grad_norm = g.norm();
  if (d.grad_norm == 0.0) return d;
  const auto fisher = [&](const Vec& v) { return fisher_vector_product(G, v); };
  const auto damped = [&](const Vec& v) { Vec out = fisher(v); out += config.cg_damping * v; return out; };

  const CgResult cg = conjugate_gradient(damped, g, config.cg_iters);
  d.cg_iterations = cg.iterations;
  Vec x = cg.x;
  double curvature = x.dot(fisher(x));
  if (cg.breakdown || !(curvature > 0.0) || !x.allFinite()) {
    d.cg_fallback = true;
    x = g;
    curvature = x.dot(damped(x));
    if (!(curvature > 0.0)) return d;
  }
  const Vec step = std::sqrt(config.step_size / curvature) * x;
  d.surrogate_improvement = g.dot(step);
  d.kl_step = 0.5 * step.dot(fisher(step));
  policy.set_params(policy.params() + step);
  return d;
}

void write_curve_csv(const std::vector<CurveRow>& curve, std::ostream& out) {
  out << "iteration,pmdp_value,pmdp_stderr,true_value,true_stderr,kl_step,"
         "surrogate_improvement,frac_rollouts_halted\n";
  char buf[512];
  for (const CurveRow& r : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.iteration,
                  r.pmdp_value, r.pmdp_stderr, r.true_value, r.true_stderr, r.kl_step,
                  r.surrogate_improvement, r.frac_rollouts_halted);
    out << buf;
  }
}

TrainResult train_npg(const Environment& model_env, const Environment& true_env,
                      GaussianMlpPolicy policy, const NpgConfig& config,
                      const std::function<void(const CurveRow&)>& progress) {
  if (config.n_updates < 0 || config.n_traj < 1 || config.eval_traj < 1) {
    throw std::invalid_argument("train_npg: invalid schedule");
  }
  const int horizon = config.horizon > 0 ? config.horizon : model_env.horizon();
  const Rng root = Rng(config.seed).split("npg");
  // common evaluation seeds across iterations
  const std::uint64_t model_seed = root.split("eval-model").key();
  const std::uint64_t true_seed = root.split("eval-true").key();
  MonteCarloOptions mc;
  mc.horizon = horizon;

  TrainResult out;
  auto evaluate = [&](CurveRow row) {
    const MonteCarloEstimate m = monte_carlo_value(model_env, policy, config.eval_traj, model_seed, mc);
    const MonteCarloEstimate t = monte_carlo_value(true_env, policy, config.eval_traj, true_seed, mc);
    row.pmdp_value = m.mean;
    row.pmdp_stderr = m.std_error;
    row.true_value = t.mean;
    row.true_stderr = t.std_error;
    row.frac_rollouts_halted = m.frac_halted;
    out.curve.push_back(row);
    if (progress) progress(row);
  };

  evaluate(CurveRow{});
  for (int it = 1; it <= config.n_updates; ++it) {
    const SampleBatch batch = sample_batch(model_env, policy, config.n_traj, horizon,
                                           root.split("sample").split(static_cast<std::uint64_t>(it)));
    const Vec adv = normalize_advantages(config.time_baseline
                                             ? time_baseline(batch.returns_to_go, batch.timesteps)
                                             : batch.returns_to_go);
    const NpgDiagnostics d = npg_step(policy, batch.states, batch.actions, adv, config);
    if (d.cg_fallback) ++out.cg_fallbacks;
    CurveRow row;
    row.iteration = it;
    row.kl_step = d.kl_step;
    row.surrogate_improvement = d.surrogate_improvement;
    evaluate(row);
  }
  out.policy = std::move(policy);
  return out;
}

}  // namespace morel

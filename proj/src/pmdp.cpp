#include "morel/pmdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace morel {

std::vector<double> reward_table(const TabularMdp& mdp) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) {
    for (int a = 0; a < mdp.n_actions(); ++a) out.push_back(mdp.reward(s, a));
  }
  return out;
}

namespace {

void check_tables(const TabularCountModel& model, const std::vector<double>& rewards,
                  const std::vector<double>& rho0_hat) {
  if (rewards.size() != static_cast<std::size_t>(model.n_states()) * model.n_actions()) {
    throw std::invalid_argument("reward table does not match the model size");
  }
  if (rho0_hat.size() != static_cast<std::size_t>(model.n_states())) {
    throw std::invalid_argument("rho0_hat does not match the model size");
  }
}

}  // namespace

PessimisticTabular build_tabular_pmdp(const TabularCountModel& model, const PairSet& unknown,
                                      const std::vector<double>& rewards, double kappa,
                                      const std::vector<double>& rho0_hat, double gamma,
                                      double r_max) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("build_tabular_pmdp: kappa must be >= 0");
  check_tables(model, rewards, rho0_hat);
  const int S = model.n_states();
  const int A = model.n_actions();
  PessimisticTabular p;
  p.halt = S;
  p.kappa = kappa;
  p.unknown = unknown;
  p.rho0_hat = rho0_hat;
  p.mdp = TabularMdp(S + 1, A, gamma, std::max(r_max, kappa));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      p.mdp.set_reward(s, a, rewards[static_cast<std::size_t>(s) * A + a]);
      if (unknown.contains(s, a)) {
        p.mdp.set_transition(s, a, S);
        continue;
      }
      if (!model.visited(s, a)) {
        throw std::invalid_argument("build_tabular_pmdp: unvisited pair (" + std::to_string(s) +
                                    ", " + std::to_string(a) + ") is not marked unknown");
      }
      std::vector<double> row = model.p_hat(s, a);
      row.push_back(0.0);
      p.mdp.set_transition(s, a, row);
    }
  }
  for (int a = 0; a < A; ++a) {
    p.mdp.set_transition(S, a, S);
    p.mdp.set_reward(S, a, -kappa);
  }
  std::vector<double> rho = rho0_hat;
  rho.push_back(0.0);
  p.mdp.set_rho0(std::move(rho));
  p.mdp.validate();
  return p;
}

TabularMdp build_naive_tabular(const TabularCountModel& model, const std::vector<double>& rewards,
                               const std::vector<double>& rho0_hat, double gamma, double r_max) {
  check_tables(model, rewards, rho0_hat);
  const int S = model.n_states();
  const int A = model.n_actions();
  TabularMdp m(S, A, gamma, r_max);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      m.set_reward(s, a, rewards[static_cast<std::size_t>(s) * A + a]);
      if (model.visited(s, a)) {
        m.set_transition(s, a, model.p_hat(s, a));
      } else {
        m.set_transition(s, a, s);
      }
    }
  }
  m.set_rho0(rho0_hat);
  m.validate();
  return m;
}

std::string to_string(HaltMode mode) {
  return mode == HaltMode::exact_sum ? "exact-sum" : "single-penalty";
}

HaltMode parse_halt_mode(const std::string& name) {
  if (name == "exact-sum") return HaltMode::exact_sum;
  if (name == "single-penalty") return HaltMode::single_penalty;
  throw std::invalid_argument("unknown halt mode '" + name + "' (exact-sum, single-penalty)");
}

std::string to_string(MemberMode mode) { return mode == MemberMode::cycle ? "cycle" : "average"; }

MemberMode parse_member_mode(const std::string& name) {
  if (name == "cycle") return MemberMode::cycle;
  if (name == "average") return MemberMode::average;
  throw std::invalid_argument("unknown member mode '" + name + "' (cycle, average)");
}

double halt_reward(HaltMode mode, double reward, double kappa, double gamma) {
  if (mode == HaltMode::single_penalty) return -kappa;
  return reward - gamma * kappa / (1.0 - gamma);
}

double default_kappa(const OfflineDataset& dataset, double offset) {
  if (dataset.transitions.empty()) throw std::invalid_argument("default_kappa: empty dataset");
  return std::max(0.0, offset - dataset.r_min());
}

// ---------------------------------------------------------------------------

TabularPessimisticRollout::TabularPessimisticRollout(const PessimisticTabular& pmdp,
                                                     HaltMode mode, int horizon)
    : pmdp_(&pmdp), augmented_(pmdp.mdp, "tabular-pmdp", horizon), mode_(mode), horizon_(horizon) {}

StepResult TabularPessimisticRollout::step(const Vec& state, const Vec& action, Rng& rng,
                                           std::size_t episode) const {
  const int s = as_index(state);
  const int a = as_index(action);
  if (s == pmdp_->halt || pmdp_->unknown.contains(s, a)) {
    StepResult out;
    const double kappa = pmdp_->kappa;
    if (s == pmdp_->halt) {
      out.reward = mode_ == HaltMode::exact_sum ? -kappa / (1.0 - gamma()) : -kappa;
    } else {
      out.reward = halt_reward(mode_, pmdp_->mdp.reward(s, a), kappa, gamma());
    }
    out.next_state = index_vector(pmdp_->halt);
    out.done = true;
    out.halted = true;
    return out;
  }
  return augmented_.step(state, action, rng, episode);
}

// ---------------------------------------------------------------------------

PessimisticRollout::PessimisticRollout(const ContinuousTask& task, const UsadEnsemble& usad,
                                       StartSampler starts, PessimisticRolloutConfig config)
    : task_(&task), usad_(&usad), starts_(std::move(starts)), config_(config) {
  if (!(config.kappa >= 0.0)) throw std::invalid_argument("PessimisticRollout: kappa must be >= 0");
  if (usad.ensemble().state_dim() != task.state_dim() ||
      usad.ensemble().action_dim() != task.action_dim()) {
    throw std::invalid_argument("PessimisticRollout: ensemble does not match the task");
  }
  if (starts_.size() == 0) throw std::invalid_argument("PessimisticRollout: no start states");
}

double PessimisticRollout::r_max() const {
  const double tail = config_.halt_mode == HaltMode::exact_sum
                          ? gamma() * config_.kappa / (1.0 - gamma())
                          : config_.kappa;
  return task_->r_max() + tail;
}

Vec PessimisticRollout::reset(Rng& rng, std::size_t) const { return starts_.sample(rng); }

StepResult PessimisticRollout::step(const Vec& state, const Vec& action, Rng&,
                                    std::size_t episode) const {
  const DynamicsEnsemble& ens = usad_->ensemble();
  const Mat s(state), a(action);
  std::vector<Mat> preds;
  preds.reserve(ens.size());
  bool finite = true;
  for (const GaussianMlpModel& m : ens.members()) {
    preds.push_back(m.predict_batch(s, a));
    finite = finite && preds.back().allFinite();
  }
  StepResult out;
  const double r = task_->reward(state, action);
  const bool unknown = !finite || usad_->is_unknown_disc(max_pairwise_distance(preds)[0]);
  if (unknown) {
    if (!finite) ++nonfinite_;
    out.reward = halt_reward(config_.halt_mode, r, config_.kappa, gamma());
    out.next_state = state;
    out.done = true;
    out.halted = true;
    return out;
  }
  out.reward = r;
  if (config_.member_mode == MemberMode::cycle) {
    out.next_state = preds[episode % preds.size()].col(0);
  } else {
    Vec mean = Vec::Zero(state.size());
    for (const Mat& p : preds) mean += p.col(0);
    out.next_state = mean / static_cast<double>(preds.size());
  }
  return out;
}

}  // namespace morel

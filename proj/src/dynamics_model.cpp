#include "morel/dynamics_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace morel {

// ---------------------------------------------------------------------------
// Tabular

TabularCountModel::TabularCountModel(int n_states, int n_actions)
    : n_states_(n_states),
      n_actions_(n_actions),
      counts_(static_cast<std::size_t>(n_states) * n_actions * n_states, 0),
      n_sa_(static_cast<std::size_t>(n_states) * n_actions, 0),
      reward_sum_(static_cast<std::size_t>(n_states) * n_actions, 0.0) {}

void TabularCountModel::add(int s, int a, int next, double reward) {
  if (s < 0 || s >= n_states_ || next < 0 || next >= n_states_ || a < 0 || a >= n_actions_) {
    std::ostringstream msg;
    msg << "TabularCountModel: transition (" << s << ", " << a << ", " << next
        << ") out of range";
    throw std::invalid_argument(msg.str());
  }
  ++counts_[flat(s, a) * n_states_ + next];
  ++n_sa_[flat(s, a)];
  reward_sum_[flat(s, a)] += reward;
}

std::vector<double> TabularCountModel::p_hat(int s, int a) const {
  const long n = visits(s, a);
  if (n == 0) throw std::logic_error("p_hat requested for an unvisited pair");
  std::vector<double> row(n_states_);
  for (int next = 0; next < n_states_; ++next) {
    row[next] = static_cast<double>(count(s, a, next)) / static_cast<double>(n);
  }
  return row;
}

double TabularCountModel::r_hat(int s, int a) const {
  const long n = visits(s, a);
  if (n == 0) throw std::logic_error("r_hat requested for an unvisited pair");
  return reward_sum_[flat(s, a)] / static_cast<double>(n);
}

TabularCountModel fit_tabular(const OfflineDataset& dataset, int n_states, int n_actions) {
  TabularCountModel model(n_states, n_actions);
  for (const Transition& tr : dataset.transitions) {
    model.add(static_cast<int>(tr.s[0]), static_cast<int>(tr.a[0]),
              static_cast<int>(tr.s_next[0]), tr.r);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Gaussian MLP model

GaussianMlpModel::GaussianMlpModel(Mlp net, NormStats stats, Vec noise_std)
    : net_(std::move(net)), stats_(std::move(stats)), noise_std_(std::move(noise_std)) {
  if (net_.input_dim() != state_dim() + action_dim() || net_.output_dim() != state_dim()) {
    throw std::invalid_argument("GaussianMlpModel: network shape does not match statistics");
  }
}

Mat GaussianMlpModel::inputs(const Mat& s, const Mat& a) const {
  Mat x(state_dim() + action_dim(), s.cols());
  x.topRows(state_dim()) =
      (s.colwise() - stats_.mu_s).array().colwise() / stats_.sigma_s.array();
  x.bottomRows(action_dim()) =
      (a.colwise() - stats_.mu_a).array().colwise() / stats_.sigma_a.array();
  return x;
}

Mat GaussianMlpModel::predict_batch(const Mat& s, const Mat& a) const {
  const Mat out = net_.forward(inputs(s, a));
  return s + (out.array().colwise() * stats_.sigma_delta.array()).matrix();
}

Vec GaussianMlpModel::predict(const Vec& s, const Vec& a) const {
  if (s.size() != state_dim() || a.size() != action_dim()) {
    throw std::invalid_argument("predict: dimension mismatch");
  }
  if (!s.allFinite() || !a.allFinite()) throw std::invalid_argument("predict: non-finite input");
  return predict_batch(Mat(s), Mat(a)).col(0);
}

Vec GaussianMlpModel::sample(const Vec& s, const Vec& a, Rng& rng) const {
  Vec mean = predict(s, a);
  for (Eigen::Index i = 0; i < mean.size(); ++i) mean[i] += noise_std_[i] * rng.normal();
  return mean;
}

DynamicsEnsemble::DynamicsEnsemble(std::vector<GaussianMlpModel> members)
    : members_(std::move(members)) {
  if (members_.size() < 2) {
    throw std::invalid_argument("DynamicsEnsemble: need K >= 2 members for a discrepancy");
  }
  for (const GaussianMlpModel& m : members_) {
    if (m.net().sizes() != members_.front().net().sizes() ||
        !(m.stats() == members_.front().stats())) {
      throw std::invalid_argument("DynamicsEnsemble: members differ in architecture or statistics");
    }
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Batches {
  Mat x;  // network inputs
  Mat y;  // normalized deltas
};

Batches design(const GaussianMlpModel& model, const OfflineDataset& d, std::size_t begin,
               std::size_t end) {
  const int ds = model.state_dim();
  const int da = model.action_dim();
  const auto n = static_cast<Eigen::Index>(end - begin);
  Mat s(ds, n), a(da, n), delta(ds, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& tr = d.transitions[begin + static_cast<std::size_t>(i)];
    s.col(i) = tr.s;
    a.col(i) = tr.a;
    delta.col(i) = tr.s_next - tr.s;
  }
  Batches b;
  b.x = model.inputs(s, a);
  b.y = delta.array().colwise() / model.stats().sigma_delta.array();
  return b;
}

}  // namespace

double mse_loss_and_gradient(const Mlp& net, const Mat& x, const Mat& y, Vec& grad) {
  Mlp::Cache cache;
  const Mat err = net.forward(x, cache) - y;
  const double scale = 1.0 / static_cast<double>(err.size());
  grad = Vec::Zero(net.n_params());
  net.backward(cache, 2.0 * scale * err, grad);
  return scale * err.squaredNorm();
}

double normalized_mse(const GaussianMlpModel& model, const OfflineDataset& dataset,
                      std::size_t begin, std::size_t end) {
  if (end <= begin) return 0.0;
  const Batches b = design(model, dataset, begin, end);
  return (model.net().forward(b.x) - b.y).squaredNorm() / static_cast<double>(b.y.size());
}

DynamicsEnsemble fit_ensemble(const OfflineDataset& dataset, const EnsembleConfig& config,
                              FitReport* report) {
  if (config.K < 2) throw std::invalid_argument("fit_ensemble: K must be >= 2");
  if (config.batch_size < 1 || config.epochs < 0 || config.layers < 1 || config.width < 1) {
    throw std::invalid_argument("fit_ensemble: invalid architecture or schedule");
  }
  if (dataset.size() < static_cast<std::size_t>(config.batch_size)) {
    throw std::invalid_argument("fit_ensemble: dataset smaller than one batch");
  }
  const NormStats stats = compute_stats(dataset);
  const int ds = static_cast<int>(stats.mu_s.size());
  const int da = static_cast<int>(stats.mu_a.size());
  std::vector<int> sizes{ds + da};
  for (int l = 0; l < config.layers; ++l) sizes.push_back(config.width);
  sizes.push_back(ds);

  const std::size_t n = dataset.size();
  const auto n_hold = static_cast<std::size_t>(std::floor(config.holdout * static_cast<double>(n)));
  const std::size_t n_train = n - n_hold;

  const Rng root = Rng(config.seed).split("ensemble");
  const AdamConfig adam{config.step_size};
  std::vector<GaussianMlpModel> members;
  if (report) report->members.clear();

  GaussianMlpModel proto(Mlp(sizes, Activation::relu), stats, config.noise_scale * stats.sigma_delta);
  const Batches train = design(proto, dataset, 0, n_train);

  for (int k = 0; k < config.K; ++k) {
    const Rng rng = root.split(static_cast<std::uint64_t>(k));
    GaussianMlpModel model = proto;
    Rng init_rng = rng.split("init");
    model.net().init(init_rng);

    MemberLog log;
    log.initial_holdout_mse = normalized_mse(model, dataset, n_train, n);

    std::vector<Eigen::Index> order(n_train);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    AdamState state;
    Vec grad;
    Mat xb, yb;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      Rng shuffle = rng.split("batches").split(static_cast<std::uint64_t>(epoch));
      for (std::size_t i = n_train; i > 1; --i) {
        std::swap(order[i - 1], order[shuffle.below(i)]);
      }
      double epoch_loss = 0.0;
      int batch = 0;
      for (std::size_t start = 0; start < n_train; start += config.batch_size, ++batch) {
        const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(config.batch_size));
        const auto m = static_cast<Eigen::Index>(stop - start);
        xb.resize(train.x.rows(), m);
        yb.resize(train.y.rows(), m);
        for (Eigen::Index j = 0; j < m; ++j) {
          xb.col(j) = train.x.col(order[start + static_cast<std::size_t>(j)]);
          yb.col(j) = train.y.col(order[start + static_cast<std::size_t>(j)]);
        }
        const double loss = mse_loss_and_gradient(model.net(), xb, yb, grad);
        if (!std::isfinite(loss) || !grad.allFinite()) {
          std::ostringstream msg;
          msg << "fit_ensemble: non-finite loss in member " << k << " at epoch " << epoch
              << ", batch " << batch;
          throw std::runtime_error(msg.str());
        }
        adam_step(model.net().params(), grad, state, adam);
        epoch_loss += loss * static_cast<double>(m);
      }
      log.epoch_loss.push_back(epoch_loss / static_cast<double>(n_train));
    }
    log.final_holdout_mse = normalized_mse(model, dataset, n_train, n);
    if (report) report->members.push_back(std::move(log));
    members.push_back(std::move(model));
  }
  return DynamicsEnsemble(std::move(members));
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const GaussianMlpModel& model, std::ostream& out, std::uint64_t seed) {
  out << "dynamics-checkpoint 1\n";
  out << "seed " << seed << '\n';
  const NormStats& st = model.stats();
  for (const auto& [name, v] : {std::pair<const char*, const Vec*>{"mu_s", &st.mu_s},
                                {"sigma_s", &st.sigma_s},
                                {"mu_a", &st.mu_a},
                                {"sigma_a", &st.sigma_a},
                                {"sigma_delta", &st.sigma_delta},
                                {"noise_std", &model.noise_std()}}) {
    out << name << ' ';
    write_vec(out, *v);
  }
  write_mlp(model.net(), out);
}

GaussianMlpModel load_checkpoint(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "dynamics-checkpoint") {
    throw std::runtime_error("checkpoint: missing dynamics-checkpoint header");
  }
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  std::uint64_t seed = 0;
  if (!(in >> tag >> seed) || tag != "seed") throw std::runtime_error("checkpoint: missing seed");
  NormStats st;
  Vec noise;
  for (const auto& [name, v] : {std::pair<const char*, Vec*>{"mu_s", &st.mu_s},
                                {"sigma_s", &st.sigma_s},
                                {"mu_a", &st.mu_a},
                                {"sigma_a", &st.sigma_a},
                                {"sigma_delta", &st.sigma_delta},
                                {"noise_std", &noise}}) {
    if (!(in >> tag) || tag != name) throw std::runtime_error(std::string("checkpoint: expected ") + name);
    *v = read_vec(in);
  }
  Mlp net = read_mlp(in);
  return GaussianMlpModel(std::move(net), std::move(st), std::move(noise));
}

}  // namespace morel

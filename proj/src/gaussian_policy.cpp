#include "morel/gaussian_policy.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace morel {

namespace {

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

GaussianMlpPolicy::GaussianMlpPolicy(int state_dim, int action_dim, std::vector<int> hidden,
                                     double log_std_init, double log_std_min)
    : net_(layer_sizes(state_dim, hidden, action_dim), Activation::tanh),
      log_std_(Vec::Constant(action_dim, std::max(log_std_init, log_std_min))),
      log_std_min_(log_std_min),
      shift_(Vec::Zero(state_dim)),
      scale_(Vec::Ones(state_dim)) {}

void GaussianMlpPolicy::set_log_std(const Vec& log_std) {
  if (log_std.size() != action_dim()) throw std::invalid_argument("set_log_std: size mismatch");
  log_std_ = log_std.cwiseMax(log_std_min_);
}

void GaussianMlpPolicy::set_input_normalization(Vec shift, Vec scale) {
  if (shift.size() != state_dim() || scale.size() != state_dim()) {
    throw std::invalid_argument("set_input_normalization: size mismatch");
  }
  shift_ = std::move(shift);
  scale_ = std::move(scale);
}

Vec GaussianMlpPolicy::params() const {
  Vec theta(n_params());
  theta << net_.params(), log_std_;
  return theta;
}

void GaussianMlpPolicy::set_params(const Vec& theta) {
  if (theta.size() != n_params()) throw std::invalid_argument("set_params: size mismatch");
  net_.params() = theta.head(net_.n_params());
  set_log_std(theta.tail(action_dim()));
}

Mat GaussianMlpPolicy::normalize(const Mat& states) const {
  return (states.colwise() - shift_).array().colwise() / scale_.array();
}

Mat GaussianMlpPolicy::mean_batch(const Mat& states) const { return net_.forward(normalize(states)); }

Vec GaussianMlpPolicy::mean_action(const Vec& state) const { return mean_batch(Mat(state)).col(0); }

Vec GaussianMlpPolicy::act(const Vec& state, Rng& rng) const {
  Vec a = mean_action(state);
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += std::exp(log_std_[i]) * rng.normal();
  return a;
}

Vec GaussianMlpPolicy::log_prob(const Mat& states, const Mat& actions) const {
  const Mat mu = mean_batch(states);
  const Vec inv_std = (-log_std_).array().exp();
  const Mat z = ((actions - mu).array().colwise() * inv_std.array()).matrix();
  const double constant =
      -log_std_.sum() - 0.5 * action_dim() * std::log(2.0 * std::numbers::pi);
  return (-0.5 * z.colwise().squaredNorm().array() + constant).matrix().transpose();
}

double GaussianMlpPolicy::log_prob(const Vec& state, const Vec& action) const {
  return log_prob(Mat(state), Mat(action))[0];
}

Mat GaussianMlpPolicy::score(const Mat& states, const Mat& actions) const {
  Mlp::Cache cache;
  const Mat mu = net_.forward(normalize(states), cache);
  const Vec inv_var = (-2.0 * log_std_).array().exp();
  const Mat diff = actions - mu;
  // d log pi / d mu = (a - mu) / sigma^2 ; d log pi / d log_std = z^2 - 1
  const Mat dmu = (diff.array().colwise() * inv_var.array()).matrix();
  Mat out(n_params(), states.cols());
  out.topRows(net_.n_params()) = net_.per_sample_gradients(cache, dmu);
  out.bottomRows(action_dim()) =
      ((diff.array().square().colwise() * inv_var.array()) - 1.0).matrix();
  return out;
}

Vec GaussianMlpPolicy::weighted_score(const Mat& states, const Mat& actions,
                                      const Vec& weights) const {
  Mlp::Cache cache;
  const Mat mu = net_.forward(normalize(states), cache);
  const Vec inv_var = (-2.0 * log_std_).array().exp();
  const Mat diff = actions - mu;
  const Mat dmu =
      ((diff.array().colwise() * inv_var.array()).rowwise() * weights.transpose().array()).matrix();
  Vec grad = Vec::Zero(net_.n_params());
  net_.backward(cache, dmu, grad);
  Vec out(n_params());
  out.head(net_.n_params()) = grad;
  out.tail(action_dim()) =
      ((diff.array().square().colwise() * inv_var.array()) - 1.0).matrix() * weights;
  return out;
}

void save_policy(const GaussianMlpPolicy& policy, std::ostream& out) {
  out << "gaussian-mlp-policy 1\n";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", policy.log_std_min());
  out << "log_std_min " << buf << '\n';
  out << "log_std ";
  write_vec(out, policy.log_std());
  out << "input_shift ";
  write_vec(out, policy.input_shift());
  out << "input_scale ";
  write_vec(out, policy.input_scale());
  write_mlp(policy.net(), out);
}

GaussianMlpPolicy load_policy(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "gaussian-mlp-policy" || version != 1) {
    throw std::runtime_error("policy file: missing or unsupported header");
  }
  double log_std_min = 0.0;
  if (!(in >> tag >> log_std_min) || tag != "log_std_min") {
    throw std::runtime_error("policy file: expected log_std_min");
  }
  auto field = [&](const char* name) {
    if (!(in >> tag) || tag != name) throw std::runtime_error(std::string("policy file: expected ") + name);
    return read_vec(in);
  };
  Vec log_std = field("log_std");
  Vec shift = field("input_shift");
  Vec scale = field("input_scale");
  Mlp net = read_mlp(in);
  std::vector<int> hidden(net.sizes().begin() + 1, net.sizes().end() - 1);
  GaussianMlpPolicy policy(net.input_dim(), net.output_dim(), hidden, log_std_min, log_std_min);
  policy.net() = std::move(net);
  policy.set_log_std(log_std);
  policy.set_input_normalization(std::move(shift), std::move(scale));
  return policy;
}

}  // namespace morel

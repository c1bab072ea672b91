#include "morel/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace morel {

std::string to_string(Activation act) { return act == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Mlp::Mlp(std::vector<int> sizes, Activation hidden) : sizes_(std::move(sizes)), act_(hidden) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("Mlp: empty layer");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Vec::Zero(total);
}

void Mlp::init(Rng& rng) {
  for (int l = 0; l < n_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    const Eigen::Index count = static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    for (Eigen::Index i = 0; i < count; ++i) params_[offsets_[l] + i] = rng.uniform(-bound, bound);
  }
}

Eigen::Map<const Mat> Mlp::weight(int l) const {
  return {params_.data() + weight_offset(l), sizes_[l + 1], sizes_[l]};
}

Eigen::Map<const Vec> Mlp::bias(int l) const {
  return {params_.data() + bias_offset(l), sizes_[l + 1]};
}

Mat Mlp::forward(const Mat& x) const {
  Mat h = x;
  for (int l = 0; l < n_layers(); ++l) {
    Mat z = weight(l) * h;
    z.colwise() += bias(l);
    if (l + 1 < n_layers()) {
      if (act_ == Activation::relu) {
        h = z.cwiseMax(0.0);
      } else {
        h = z.array().tanh().matrix();
      }
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Mat Mlp::forward(const Mat& x, Cache& cache) const {
  cache.inputs.assign(n_layers(), Mat());
  cache.pre.assign(n_layers(), Mat());
  Mat h = x;
  for (int l = 0; l < n_layers(); ++l) {
    cache.inputs[l] = h;
    Mat z = weight(l) * h;
    z.colwise() += bias(l);
    cache.pre[l] = z;
    if (l + 1 < n_layers()) {
      if (act_ == Activation::relu) {
        h = z.cwiseMax(0.0);
      } else {
        h = z.array().tanh().matrix();
      }
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Mat Mlp::activation_backward(const Mat& pre, const Mat& dpost) const {
  if (act_ == Activation::relu) return (pre.array() > 0.0).select(dpost, 0.0);
  const Eigen::ArrayXXd t = pre.array().tanh();
  return (dpost.array() * (1.0 - t * t)).matrix();
}

void Mlp::backward(const Cache& cache, const Mat& dy, Vec& grad, Mat* dx) const {
  if (grad.size() != n_params()) grad = Vec::Zero(n_params());
  Mat delta = dy;  // dL/dpre of the current layer
  for (int l = n_layers() - 1; l >= 0; --l) {
    Eigen::Map<Mat> gw(grad.data() + weight_offset(l), sizes_[l + 1], sizes_[l]);
    Eigen::Map<Vec> gb(grad.data() + bias_offset(l), sizes_[l + 1]);
    gw.noalias() += delta * cache.inputs[l].transpose();
    gb += delta.rowwise().sum();
    if (l > 0) {
      Mat dh = weight(l).transpose() * delta;
      delta = activation_backward(cache.pre[l - 1], dh);
    } else if (dx) {
      *dx = weight(0).transpose() * delta;
    }
  }
}

Mat Mlp::per_sample_gradients(const Cache& cache, const Mat& dy) const {
  const Eigen::Index batch = dy.cols();
  Mat out(n_params(), batch);
  Mat delta = dy;
  for (int l = n_layers() - 1; l >= 0; --l) {
    const int rows = sizes_[l + 1];
    const int cols = sizes_[l];
    for (Eigen::Index i = 0; i < batch; ++i) {
      Eigen::Map<Mat> gw(out.col(i).data() + weight_offset(l), rows, cols);
      gw.noalias() = delta.col(i) * cache.inputs[l].col(i).transpose();
      out.col(i).segment(bias_offset(l), rows) = delta.col(i);
    }
    if (l > 0) {
      Mat dh = weight(l).transpose() * delta;
      delta = activation_backward(cache.pre[l - 1], dh);
    }
  }
  return out;
}

void adam_step(Vec& params, const Vec& grad, AdamState& state, const AdamConfig& c) {
  if (grad.size() != params.size()) throw std::invalid_argument("adam_step: shape mismatch");
  if (state.m.size() != params.size()) {
    state.m = Vec::Zero(params.size());
    state.v = Vec::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  params.array() -=
      c.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + c.eps);
}

// ---------------------------------------------------------------------------
// Text serialization

void write_vec(std::ostream& out, const Vec& v) {
  out << v.size();
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), " %.17g", v[i]);
    out << buf;
  }
  out << '\n';
}

Vec read_vec(std::istream& in) {
  Eigen::Index n = 0;
  if (!(in >> n) || n < 0) throw std::runtime_error("checkpoint: bad vector length");
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(in >> v[i])) throw std::runtime_error("checkpoint: truncated vector");
  }
  return v;
}

void write_mlp(const Mlp& net, std::ostream& out) {
  out << "mlp " << to_string(net.activation()) << ' ' << net.sizes().size();
  for (int s : net.sizes()) out << ' ' << s;
  out << '\n';
  write_vec(out, net.params());
}

Mlp read_mlp(std::istream& in) {
  std::string tag, act;
  std::size_t n = 0;
  if (!(in >> tag >> act >> n) || tag != "mlp") throw std::runtime_error("checkpoint: expected mlp");
  std::vector<int> sizes(n);
  for (int& s : sizes) {
    if (!(in >> s)) throw std::runtime_error("checkpoint: truncated layer sizes");
  }
  Mlp net(sizes, parse_activation(act));
  Vec params = read_vec(in);
  if (params.size() != net.n_params()) throw std::runtime_error("checkpoint: parameter count mismatch");
  net.params() = std::move(params);
  return net;
}

}  // namespace morel

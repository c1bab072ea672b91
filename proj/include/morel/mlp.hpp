#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "morel/simulation.hpp"

namespace morel {

enum class Activation { relu, tanh };

std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

/// Fully connected network with a linear output layer. Parameters live in
/// one flat vector: for each layer the weight matrix (out x in, column
/// major) followed by the bias. Batches are matrices with one sample per
/// column.
class Mlp {
 public:
  struct Cache {
    /// inputs[l] is the input of layer l; pre[l] its pre-activation.
    std::vector<Mat> inputs;
    std::vector<Mat> pre;
  };

  Mlp() = default;
  /// `sizes` = {input, hidden..., output}.
  Mlp(std::vector<int> sizes, Activation hidden);

  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation() const { return act_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index n_params() const { return params_.size(); }

  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  /// Weights and biases uniform in +-1/sqrt(fan_in).
  void init(Rng& rng);

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Cache& cache) const;

  /// Accumulates dL/dparams (summed over the batch) into `grad` given dL/dY.
  /// Writes dL/dX when `dx` is non-null.
  void backward(const Cache& cache, const Mat& dy, Vec& grad, Mat* dx = nullptr) const;

  /// Column i holds the gradient of sum_k dy(k, i) * Y(k, i) for sample i
  /// alone (n_params x batch).
  Mat per_sample_gradients(const Cache& cache, const Mat& dy) const;

 private:
  Eigen::Map<const Mat> weight(int layer) const;
  Eigen::Map<const Vec> bias(int layer) const;
  Eigen::Index weight_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(int layer) const {
    return offsets_[layer] + static_cast<Eigen::Index>(sizes_[layer + 1]) * sizes_[layer];
  }
  /// dL/dpre from dL/dpost for a hidden layer.
  Mat activation_backward(const Mat& pre, const Mat& dpost) const;

  std::vector<int> sizes_;
  Activation act_ = Activation::relu;
  std::vector<Eigen::Index> offsets_;
  Vec params_;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vec m;
  Vec v;
  long step = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(Vec& params, const Vec& grad, AdamState& state, const AdamConfig& config);

/// Text form: sizes, activation, then every parameter with 17 significant
/// digits. Round-trips exactly.
void write_mlp(const Mlp& net, std::ostream& out);
Mlp read_mlp(std::istream& in);

void write_vec(std::ostream& out, const Vec& v);
Vec read_vec(std::istream& in);

}  // namespace morel

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mup/layer_spec.hpp"
#include "mup/matrix.hpp"
#include "mup/scaling.hpp"

namespace mup {

enum class Activation { Identity, ReLU, Tanh };
enum class LossKind { MSE, SoftmaxCE };

std::string_view to_string(Activation act);
std::string_view to_string(LossKind kind);
Activation parse_activation(std::string_view name);
LossKind parse_loss(std::string_view name);

struct Layer {
  LayerSpec spec;
  Matrix weight;            // sampled matrix, fan_out x fan_in
  double multiplier = 1.0;  // effective weight = multiplier * weight
};

/// Bias-free MLP. The activation follows every layer except the last.
class Mlp {
 public:
  Mlp(std::vector<Layer> layers, Activation activation);

  std::size_t depth() const noexcept { return layers_.size(); }
  Activation activation() const noexcept { return activation_; }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }
  std::span<const Layer> layers() const noexcept { return layers_; }
  std::size_t input_dim() const { return layers_.front().spec.fan_in; }
  std::size_t output_dim() const { return layers_.back().spec.fan_out; }

  Matrix effective_weight(std::size_t l) const;
  void set_effective_weight(std::size_t l, const Matrix& w);
  /// W_l += delta, expressed on the effective weight.
  void apply_update(std::size_t l, const Matrix& delta);
  /// Frobenius norm of all effective weights stacked into one vector.
  double parameter_norm() const;

 private:
  std::vector<Layer> layers_;
  Activation activation_;
};

/// Samples W~_l = init_std * N(0,1) layer by layer from one generator seeded
/// with `seed`, and takes multipliers from derive_rule.
Mlp build(std::span<const LayerSpec> specs, ParamScheme scheme, OptimizerKind kind, std::uint64_t seed,
          Activation activation = Activation::Identity);

struct ForwardTrace {
  std::vector<Matrix> features;  // h_0 = x, h_1 .. h_L (pre-activation)
  std::vector<Matrix> inputs;    // phi(h_{l-1}) fed into layer l, l = 1..L (index l-1)
  std::size_t batch() const { return features.front().cols(); }
  const Matrix& output() const { return features.back(); }
};

struct Grads {
  std::vector<Matrix> weights;   // dL/dW_l for l = 1..L (index l-1), effective weights
  std::vector<Matrix> features;  // dL/dh_l for l = 1..L (index l-1)
};

/// x holds one sample per column.
ForwardTrace forward(const Mlp& mlp, const Matrix& x);

/// Mean over the batch. MSE uses 1/2 ||h_L - y||^2 per sample; SoftmaxCE
/// takes a 1 x batch matrix of class indices.
double loss(const ForwardTrace& trace, const Matrix& targets, LossKind kind);
double loss(const Matrix& output, const Matrix& targets, LossKind kind);

/// Exact gradients of the batch-mean loss.
Grads backward(const Mlp& mlp, const ForwardTrace& trace, const Matrix& targets, LossKind kind);

/// Convenience: forward + loss + backward.
Grads gradients(const Mlp& mlp, const Matrix& x, const Matrix& targets, LossKind kind,
                double* loss_out = nullptr);

}  // namespace mup

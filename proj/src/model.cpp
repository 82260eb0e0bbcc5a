#include "mup/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "mup/error.hpp"
#include "mup/text.hpp"

namespace mup {

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

std::string_view to_string(LossKind kind) { return kind == LossKind::MSE ? "mse" : "softmax_ce"; }

Activation parse_activation(std::string_view name) {
  const std::string n = to_lower(trim(name));
  if (n == "identity" || n == "linear") return Activation::Identity;
  if (n == "relu") return Activation::ReLU;
  if (n == "tanh") return Activation::Tanh;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

LossKind parse_loss(std::string_view name) {
  const std::string n = to_lower(trim(name));
  if (n == "mse") return LossKind::MSE;
  if (n == "softmax_ce" || n == "ce" || n == "cross_entropy") return LossKind::SoftmaxCE;
  throw InvalidArgument("unknown loss '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<Layer> layers, Activation activation)
    : layers_(std::move(layers)), activation_(activation) {
  std::vector<LayerSpec> specs;
  for (const auto& layer : layers_) {
    if (layer.weight.rows() != layer.spec.fan_out || layer.weight.cols() != layer.spec.fan_in)
      throw InvalidArgument("Mlp: weight shape does not match its LayerSpec");
    if (!(layer.multiplier > 0.0) || !std::isfinite(layer.multiplier))
      throw InvalidArgument("Mlp: multipliers must be finite and positive");
    specs.push_back(layer.spec);
  }
  validate_chain(specs);
}

Matrix Mlp::effective_weight(std::size_t l) const {
  const Layer& layer = layers_.at(l);
  return layer.weight * layer.multiplier;
}

void Mlp::set_effective_weight(std::size_t l, const Matrix& w) {
  Layer& layer = layers_.at(l);
  if (!w.same_shape(layer.weight)) throw InvalidArgument("set_effective_weight: shape mismatch");
  if (!w.all_finite()) throw NumericalError("set_effective_weight: non-finite weight");
  layer.weight = w * (1.0 / layer.multiplier);
}

void Mlp::apply_update(std::size_t l, const Matrix& delta) {
  Layer& layer = layers_.at(l);
  if (!delta.same_shape(layer.weight)) throw InvalidArgument("apply_update: shape mismatch");
  const double inv = 1.0 / layer.multiplier;
  auto w = layer.weight.values();
  auto d = delta.values();
  for (std::size_t k = 0; k < w.size(); ++k) w[k] += d[k] * inv;
}

double Mlp::parameter_norm() const {
  double sum = 0.0;
  for (const auto& layer : layers_) {
    const double m2 = layer.multiplier * layer.multiplier;
    for (double x : layer.weight.values()) sum += m2 * x * x;
  }
  return std::sqrt(sum);
}

Mlp build(std::span<const LayerSpec> specs, ParamScheme scheme, OptimizerKind kind, std::uint64_t seed,
          Activation activation) {
  validate_chain(specs);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Layer> layers;
  layers.reserve(specs.size());
  for (const LayerSpec& spec : specs) {
    const ScalingRule rule = derive_rule(kind, spec, scheme);
    Matrix w(spec.fan_out, spec.fan_in);
    for (double& x : w.values()) x = rule.init_std * normal(rng);
    layers.push_back({spec, std::move(w), rule.weight_mult});
  }
  return Mlp(std::move(layers), activation);
}

namespace {

void activate(Matrix& m, Activation act) {
  switch (act) {
    case Activation::Identity: return;
    case Activation::ReLU:
      for (double& x : m.values()) x = x > 0.0 ? x : 0.0;
      return;
    case Activation::Tanh:
      for (double& x : m.values()) x = std::tanh(x);
      return;
  }
}

// dphi/dh evaluated at pre-activation h, multiplied into g in place.
void scale_by_derivative(Matrix& g, const Matrix& h, Activation act) {
  auto gv = g.values();
  auto hv = h.values();
  switch (act) {
    case Activation::Identity: return;
    case Activation::ReLU:
      for (std::size_t k = 0; k < gv.size(); ++k)
        if (!(hv[k] > 0.0)) gv[k] = 0.0;
      return;
    case Activation::Tanh:
      for (std::size_t k = 0; k < gv.size(); ++k) {
        const double t = std::tanh(hv[k]);
        gv[k] *= 1.0 - t * t;
      }
      return;
  }
}

void check_class_targets(const Matrix& output, const Matrix& targets) {
  if (targets.rows() != 1 || targets.cols() != output.cols())
    throw InvalidArgument("softmax_ce: targets must be 1 x batch class indices");
  for (double t : targets.values()) {
    if (t < 0.0 || t >= static_cast<double>(output.rows()) || t != std::floor(t))
      throw InvalidArgument("softmax_ce: class index out of range: " + format_number(t));
  }
}

// Column-wise softmax of the logits.
Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t j = 0; j < p.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.rows(); ++i) mx = std::max(mx, p(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
      p(i, j) = std::exp(p(i, j) - mx);
      sum += p(i, j);
    }
    for (std::size_t i = 0; i < p.rows(); ++i) p(i, j) /= sum;
  }
  return p;
}

}  // namespace

ForwardTrace forward(const Mlp& mlp, const Matrix& x) {
  if (x.rows() != mlp.input_dim())
    throw InvalidArgument("forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                          std::to_string(mlp.input_dim()));
  if (x.cols() == 0) throw InvalidArgument("forward: empty batch");
  ForwardTrace trace;
  trace.features.reserve(mlp.depth() + 1);
  trace.inputs.reserve(mlp.depth());
  trace.features.push_back(x);
  for (std::size_t l = 0; l < mlp.depth(); ++l) {
    Matrix a = trace.features.back();
    if (l > 0) activate(a, mlp.activation());
    const Layer& layer = mlp.layer(l);
    Matrix h = matmul(layer.weight, a);
    h *= layer.multiplier;
    trace.inputs.push_back(std::move(a));
    trace.features.push_back(std::move(h));
  }
  return trace;
}

double loss(const Matrix& output, const Matrix& targets, LossKind kind) {
  const double batch = static_cast<double>(output.cols());
  if (kind == LossKind::MSE) {
    if (!targets.same_shape(output)) throw InvalidArgument("mse: target shape does not match output");
    double sum = 0.0;
    auto o = output.values();
    auto t = targets.values();
    for (std::size_t k = 0; k < o.size(); ++k) sum += 0.5 * (o[k] - t[k]) * (o[k] - t[k]);
    return sum / batch;
  }
  check_class_targets(output, targets);
  double sum = 0.0;
  for (std::size_t j = 0; j < output.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < output.rows(); ++i) mx = std::max(mx, output(i, j));
    double z = 0.0;
    for (std::size_t i = 0; i < output.rows(); ++i) z += std::exp(output(i, j) - mx);
    const auto cls = static_cast<std::size_t>(targets(0, j));
    sum += mx + std::log(z) - output(cls, j);
  }
  return sum / batch;
}

double loss(const ForwardTrace& trace, const Matrix& targets, LossKind kind) {
  return loss(trace.output(), targets, kind);
}

Grads backward(const Mlp& mlp, const ForwardTrace& trace, const Matrix& targets, LossKind kind) {
  const std::size_t depth = mlp.depth();
  if (trace.features.size() != depth + 1 || trace.inputs.size() != depth)
    throw InvalidArgument("backward: trace depth does not match model");
  for (std::size_t l = 0; l < depth; ++l) {
    const LayerSpec& spec = mlp.layer(l).spec;
    if (trace.features[l + 1].rows() != spec.fan_out || trace.inputs[l].rows() != spec.fan_in)
      throw InvalidArgument("backward: stale trace (layer " + std::to_string(l + 1) + " shape drift)");
  }
  const Matrix& out = trace.output();
  const double inv_batch = 1.0 / static_cast<double>(out.cols());

  Matrix delta;
  if (kind == LossKind::MSE) {
    if (!targets.same_shape(out)) throw InvalidArgument("mse: target shape does not match output");
    delta = (out - targets) * inv_batch;
  } else {
    check_class_targets(out, targets);
    delta = softmax(out);
    for (std::size_t j = 0; j < out.cols(); ++j) delta(static_cast<std::size_t>(targets(0, j)), j) -= 1.0;
    delta *= inv_batch;
  }

  Grads grads;
  grads.weights.resize(depth);
  grads.features.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    grads.weights[l] = matmul_nt(delta, trace.inputs[l]);
    grads.features[l] = delta;
    if (l == 0) break;
    const Layer& layer = mlp.layer(l);
    Matrix back = matmul_tn(layer.weight, delta);
    back *= layer.multiplier;
    scale_by_derivative(back, trace.features[l], mlp.activation());
    delta = std::move(back);
  }
  return grads;
}

Grads gradients(const Mlp& mlp, const Matrix& x, const Matrix& targets, LossKind kind, double* loss_out) {
  const ForwardTrace trace = forward(mlp, x);
  if (loss_out != nullptr) *loss_out = loss(trace, targets, kind);
  return backward(mlp, trace, targets, kind);
}

}  // namespace mup

#include "mup/hessian.hpp"

#include <cmath>

#include "mup/error.hpp"
#include "mup/linalg.hpp"

namespace mup {

double hutchinson_radius(double param_norm) { return 1e-4 * (1.0 + param_norm); }

std::vector<double> hutchinson_probe(std::span<const double> params, const GradientFn& grad,
                                     double radius, std::mt19937_64& rng) {
  const std::size_t n = params.size();
  std::vector<double> z(n);
  std::bernoulli_distribution coin(0.5);
  for (double& zi : z) zi = coin(rng) ? 1.0 : -1.0;

  std::vector<double> plus(params.begin(), params.end());
  std::vector<double> minus(params.begin(), params.end());
  for (std::size_t i = 0; i < n; ++i) {
    plus[i] += radius * z[i];
    minus[i] -= radius * z[i];
  }
  const std::vector<double> gp = grad(plus);
  const std::vector<double> gm = grad(minus);
  if (gp.size() != n || gm.size() != n) throw InvalidArgument("hutchinson_probe: gradient size mismatch");

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = z[i] * (gp[i] - gm[i]) / (2.0 * radius);
    if (!std::isfinite(out[i])) throw NumericalError("hutchinson_probe: non-finite Hessian-vector product");
  }
  return out;
}

std::vector<double> flatten(std::span<const Matrix> mats) {
  std::vector<double> out;
  for (const auto& m : mats) out.insert(out.end(), m.values().begin(), m.values().end());
  return out;
}

std::vector<double> flatten_weights(const Mlp& mlp) {
  std::vector<double> out;
  for (std::size_t l = 0; l < mlp.depth(); ++l) {
    const Matrix w = mlp.effective_weight(l);
    out.insert(out.end(), w.values().begin(), w.values().end());
  }
  return out;
}

void unflatten_weights(Mlp& mlp, std::span<const double> params) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < mlp.depth(); ++l) {
    const LayerSpec& s = mlp.layer(l).spec;
    const std::size_t count = s.fan_in * s.fan_out;
    if (offset + count > params.size()) throw InvalidArgument("unflatten_weights: too few parameters");
    Matrix w(s.fan_out, s.fan_in,
             std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(offset),
                                 params.begin() + static_cast<std::ptrdiff_t>(offset + count)));
    mlp.set_effective_weight(l, w);
    offset += count;
  }
  if (offset != params.size()) throw InvalidArgument("unflatten_weights: too many parameters");
}

std::vector<Matrix> estimate_hessian_diag(const Mlp& mlp, const Matrix& x, const Matrix& targets,
                                          LossKind kind, std::mt19937_64& rng, int probes) {
  if (x.cols() == 0) throw InvalidArgument("estimate_hessian_diag: empty batch");
  if (probes < 1) throw InvalidArgument("estimate_hessian_diag: probes must be >= 1");
  Mlp scratch = mlp;
  std::vector<Matrix> out;
  out.reserve(mlp.depth());
  for (std::size_t l = 0; l < mlp.depth(); ++l) {
    const Matrix w0 = mlp.effective_weight(l);
    const LayerSpec& s = mlp.layer(l).spec;
    // gradient of layer l with every other layer held at its current value
    const GradientFn grad = [&](std::span<const double> p) {
      scratch.set_effective_weight(l, Matrix(s.fan_out, s.fan_in, std::vector<double>(p.begin(), p.end())));
      const Grads g = gradients(scratch, x, targets, kind);
      return std::vector<double>(g.weights[l].values().begin(), g.weights[l].values().end());
    };
    const double radius = hutchinson_radius(frobenius_norm(w0));
    Matrix sum(s.fan_out, s.fan_in);
    for (int k = 0; k < probes; ++k) {
      std::vector<double> est;
      const auto state = rng;
      try {
        est = hutchinson_probe(w0.values(), grad, radius, rng);
      } catch (const NumericalError&) {
        rng = state;
        est = hutchinson_probe(w0.values(), grad, radius * 0.1, rng);
      }
      auto sv = sum.values();
      for (std::size_t i = 0; i < sv.size(); ++i) sv[i] += est[i];
    }
    scratch.set_effective_weight(l, w0);
    sum *= 1.0 / probes;
    out.push_back(std::move(sum));
  }
  return out;
}

}  // namespace mup

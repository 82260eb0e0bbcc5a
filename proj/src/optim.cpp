#include "mup/optim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "mup/error.hpp"
#include "mup/linalg.hpp"

namespace mup {

void HyperParams::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x < 1.0; };
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be finite and >= 0");
  if (!in_unit(beta1)) throw InvalidArgument("beta1 must lie in [0, 1)");
  if (!in_unit(beta2)) throw InvalidArgument("beta2 must lie in [0, 1)");
  if (!(eps >= 0.0)) throw InvalidArgument("eps must be >= 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  if (!(delta >= 0.0)) throw InvalidArgument("delta must be >= 0");
  if (!in_unit(mu)) throw InvalidArgument("mu must lie in [0, 1)");
  if (ns_iters < 1) throw InvalidArgument("ns_iters must be >= 1");
  if (hess_interval < 1) throw InvalidArgument("hess_interval must be >= 1");
}

OptState init_state(const Mlp& mlp, OptimizerKind kind, const HyperParams& hp) {
  OptState state;
  state.layers.reserve(mlp.depth());
  for (const Layer& layer : mlp.layers()) {
    const std::size_t r = layer.spec.fan_out;
    const std::size_t c = layer.spec.fan_in;
    LayerState s;
    s.m = Matrix(r, c);
    s.v = Matrix(r, c);
    if (kind == OptimizerKind::Sophia) s.h = Matrix(r, c);
    if (kind == OptimizerKind::Shampoo) {
      s.left = Matrix::identity(r) * hp.delta;
      s.right = Matrix::identity(c) * hp.delta;
    }
    if (kind == OptimizerKind::Muon) s.momentum = Matrix(r, c);
    state.layers.push_back(std::move(s));
  }
  return state;
}

std::vector<ScalingRule> derive_rules(const Mlp& mlp, OptimizerKind kind, ParamScheme scheme) {
  std::vector<ScalingRule> rules;
  rules.reserve(mlp.depth());
  for (const Layer& layer : mlp.layers()) rules.push_back(derive_rule(kind, layer.spec, scheme));
  return rules;
}

void update_hessian_ema(OptState& state, std::span<const Matrix> estimate, double beta2) {
  if (estimate.size() != state.layers.size()) throw InvalidArgument("update_hessian_ema: layer count mismatch");
  for (std::size_t l = 0; l < estimate.size(); ++l) {
    Matrix& h = state.layers[l].h;
    if (h.empty()) h = Matrix(estimate[l].rows(), estimate[l].cols());
    if (!h.same_shape(estimate[l])) throw InvalidArgument("update_hessian_ema: shape mismatch");
    auto hv = h.values();
    auto ev = estimate[l].values();
    for (std::size_t k = 0; k < hv.size(); ++k) hv[k] = beta2 * hv[k] + (1.0 - beta2) * ev[k];
  }
}

namespace {

// Delta W = -lr * psi.
struct Proposal {
  Matrix psi;
  double lr = 0.0;
  bool skipped = false;
  std::string note;
};

void check_inputs(const Mlp& mlp, const Grads& grads, const OptState& state,
                  std::span<const ScalingRule> rules, const HyperParams& hp) {
  hp.validate();
  const std::size_t depth = mlp.depth();
  if (grads.weights.size() != depth) throw InvalidArgument("step: gradient count does not match model depth");
  if (state.layers.size() != depth) throw InvalidArgument("step: optimizer state does not match model depth");
  if (rules.size() != depth) throw InvalidArgument("step: scaling rules do not cover every layer");
  for (std::size_t l = 0; l < depth; ++l) {
    if (!grads.weights[l].same_shape(mlp.layer(l).weight))
      throw InvalidArgument("step: gradient shape mismatch at layer " + std::to_string(l + 1));
    if (!state.layers[l].m.same_shape(mlp.layer(l).weight))
      throw InvalidArgument("step: state shape mismatch at layer " + std::to_string(l + 1));
  }
}

StepReport commit(Mlp& mlp, OptState& state, std::vector<LayerState> next, std::vector<Proposal> props,
                  const StepOptions& opts) {
  std::vector<Matrix> deltas;
  deltas.reserve(props.size());
  for (std::size_t l = 0; l < props.size(); ++l) {
    Matrix d = opts.measure ? props[l].psi * (-props[l].lr) : std::move(props[l].psi) * (-props[l].lr);
    if (!d.all_finite())
      throw NumericalError("step aborted: non-finite update at layer " + std::to_string(l + 1));
    deltas.push_back(std::move(d));
  }
  for (const LayerState& s : next) {
    if (!s.m.all_finite() || !s.v.all_finite() || !s.h.all_finite() || !s.left.all_finite() ||
        !s.right.all_finite() || !s.momentum.all_finite())
      throw NumericalError("step aborted: non-finite optimizer state");
  }
  auto merge = [](Matrix& dst, Matrix& src) {
    if (!src.empty()) dst = std::move(src);
  };

  StepReport report;
  report.layers.resize(props.size());
  for (std::size_t l = 0; l < props.size(); ++l) {
    LayerReport& r = report.layers[l];
    r.effective_lr = props[l].lr;
    r.skipped = props[l].skipped;
    r.note = props[l].note;
    if (opts.measure && !props[l].skipped) {
      const std::vector<double> s = singular_values(props[l].psi);
      r.psi_spectral = s.empty() ? 0.0 : s.front();
      r.update_spectral = std::abs(props[l].lr) * r.psi_spectral;
      if (r.psi_spectral > 0.0) {
        const double cut = kDefaultRankTol * r.psi_spectral;
        r.update_rank = static_cast<std::size_t>(
            std::count_if(s.begin(), s.end(), [&](double x) { return x > cut; }));
      }
    }
    mlp.apply_update(l, deltas[l]);
    if (opts.keep_updates) r.delta = std::move(deltas[l]);
  }
  for (std::size_t l = 0; l < next.size(); ++l) {
    LayerState& dst = state.layers[l];
    LayerState& src = next[l];
    merge(dst.m, src.m);
    merge(dst.v, src.v);
    merge(dst.h, src.h);
    merge(dst.left, src.left);
    merge(dst.right, src.right);
    merge(dst.momentum, src.momentum);
  }
  ++state.step;
  return report;
}

Proposal skipped(const Matrix& like, double lr, std::string note) {
  return Proposal{Matrix(like.rows(), like.cols()), lr, true, std::move(note)};
}

// New moments from (cur, g) into out, and the bias-corrected ratio
// m_hat / (sqrt(v_hat) + eps); a zero numerator gives zero.
Matrix adam_moments_and_ratio(const LayerState& cur, const Matrix& g, long t, const HyperParams& hp, double eps,
                              LayerState& out) {
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  out.m = Matrix(g.rows(), g.cols());
  out.v = Matrix(g.rows(), g.cols());
  Matrix r(g.rows(), g.cols());
  auto m0 = cur.m.values();
  auto v0 = cur.v.values();
  auto m1 = out.m.values();
  auto v1 = out.v.values();
  auto gv = g.values();
  auto rv = r.values();
  for (std::size_t k = 0; k < gv.size(); ++k) {
    m1[k] = hp.beta1 * m0[k] + (1.0 - hp.beta1) * gv[k];
    v1[k] = hp.beta2 * v0[k] + (1.0 - hp.beta2) * gv[k] * gv[k];
    const double m_hat = m1[k] / bc1;
    const double den = std::sqrt(v1[k] / bc2) + eps;
    rv[k] = m_hat != 0.0 ? m_hat / den : 0.0;
  }
  return r;
}

// psi += decay * W_eff for layer l.
void add_decay(Matrix& psi, const Mlp& mlp, std::size_t l, double decay) {
  if (decay == 0.0) return;
  const Layer& layer = mlp.layer(l);
  const double c = decay * layer.multiplier;
  auto p = psi.values();
  auto wv = layer.weight.values();
  for (std::size_t k = 0; k < p.size(); ++k) p[k] += c * wv[k];
}

Proposal adamw_layer(const Mlp& mlp, std::size_t l, const Matrix& g, const LayerState& cur, LayerState& out,
                     long t, const HyperParams& hp, const ScalingRule& rule) {
  Matrix psi = adam_moments_and_ratio(cur, g, t, hp, hp.eps * rule.eps_mult, out);
  add_decay(psi, mlp, l, hp.weight_decay * rule.wd_mult);
  return Proposal{std::move(psi), hp.eta * rule.lr_mult, false, {}};
}

// A layer function reads the committed state `cur` and writes only the
// fields it changes into `out`; empty fields of `out` keep their old value.
using LayerFn = std::function<Proposal(std::size_t l, const Matrix& g, const LayerState& cur, LayerState& out)>;

StepReport run_layers(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                      std::span<const ScalingRule> rules, const StepOptions& opts, const LayerFn& fn) {
  check_inputs(mlp, grads, state, rules, hp);
  std::vector<LayerState> next(mlp.depth());
  std::vector<Proposal> props;
  props.reserve(mlp.depth());
  for (std::size_t l = 0; l < mlp.depth(); ++l) props.push_back(fn(l, grads.weights[l], state.layers[l], next[l]));
  return commit(mlp, state, std::move(next), std::move(props), opts);
}

}  // namespace

StepReport step_adamw(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                      std::span<const ScalingRule> rules, const StepOptions& opts) {
  const long t = state.step + 1;
  return run_layers(mlp, grads, state, hp, rules, opts,
                    [&](std::size_t l, const Matrix& g, const LayerState& cur, LayerState& out) {
                      return adamw_layer(mlp, l, g, cur, out, t, hp, rules[l]);
                    });
}

StepReport step_adopt(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                      std::span<const ScalingRule> rules, const StepOptions& opts) {
  const bool first = state.step == 0;
  return run_layers(mlp, grads, state, hp, rules, opts,
                    [&](std::size_t l, const Matrix& g, const LayerState& cur, LayerState& out) {
    const ScalingRule& rule = rules[l];
    const double lr = hp.eta * rule.lr_mult;
    out.v = hadamard(g, g);
    if (first) return skipped(g, lr, "second-moment initialization");
    const double eps = hp.eps * rule.eps_mult;
    out.m = Matrix(g.rows(), g.cols());
    auto m0 = cur.m.values();
    auto m1 = out.m.values();
    auto v0 = cur.v.values();
    auto v1 = out.v.values();
    auto gv = g.values();
    for (std::size_t k = 0; k < gv.size(); ++k) {
      const double normalized = gv[k] == 0.0 ? 0.0 : gv[k] / std::max(std::sqrt(v0[k]), eps);
      m1[k] = hp.beta1 * m0[k] + (1.0 - hp.beta1) * normalized;
      v1[k] = hp.beta2 * v0[k] + (1.0 - hp.beta2) * v1[k];
    }
    Matrix psi = out.m;
    add_decay(psi, mlp, l, hp.weight_decay * rule.wd_mult);
    return Proposal{std::move(psi), lr, false, {}};
  });
}

StepReport step_lamb(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                     std::span<const ScalingRule> rules, const StepOptions& opts) {
  const long t = state.step + 1;
  return run_layers(mlp, grads, state, hp, rules, opts,
                    [&](std::size_t l, const Matrix& g, const LayerState& cur, LayerState& out) {
    const ScalingRule& rule = rules[l];
    const double lr = hp.eta * rule.lr_mult;
    Matrix u = adam_moments_and_ratio(cur, g, t, hp, hp.eps * rule.eps_mult, out);
    const Matrix w = mlp.effective_weight(l);
    add_decay(u, mlp, l, hp.weight_decay * rule.wd_mult);
    const double denom = frobenius_norm(u);
    if (!(denom >= 1e-12)) return skipped(g, lr, "degenerate trust ratio");
    u *= frobenius_norm(w) / denom;
    return Proposal{std::move(u), lr, false, {}};
  });
}

StepReport step_sophia(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                       std::span<const ScalingRule> rules, const StepOptions& opts) {
  return run_layers(mlp, grads, state, hp, rules, opts,
                    [&](std::size_t l, const Matrix& g, const LayerState& cur, LayerState& out) {
    const ScalingRule& rule = rules[l];
    const double eps = hp.eps * rule.eps_mult;
    Matrix psi(g.rows(), g.cols());
    out.m = Matrix(g.rows(), g.cols());
    auto p = psi.values();
    auto m0 = cur.m.values();
    auto m = out.m.values();
    const bool has_h = !cur.h.empty();
    auto h = cur.h.values();
    auto gv = g.values();
    for (std::size_t k = 0; k < gv.size(); ++k) {
      m[k] = hp.beta1 * m0[k] + (1.0 - hp.beta1) * gv[k];
      if (m[k] == 0.0) continue;
      const double denom = std::max(hp.gamma * (has_h ? h[k] : 0.0), eps);
      p[k] = denom > 0.0 ? std::clamp(m[k] / denom, -1.0, 1.0) : (m[k] > 0.0 ? 1.0 : -1.0);
    }
    add_decay(psi, mlp, l, hp.weight_decay * rule.wd_mult);
    return Proposal{std::move(psi), hp.eta * rule.lr_mult, false, {}};
  });
}

StepReport step_shampoo(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                        std::span<const ScalingRule> rules, const StepOptions& opts) {
  return run_layers(mlp, grads, state, hp, rules, opts,
                    [&](std::size_t l, const Matrix& g, const LayerState& cur, LayerState& s) {
    const double lr = hp.eta * rules[l].lr_mult;
    s.left = cur.left.empty() ? Matrix::identity(g.rows()) * hp.delta : cur.left;
    s.right = cur.right.empty() ? Matrix::identity(g.cols()) * hp.delta : cur.right;
    auto accumulate = [](Matrix& acc, const Matrix& gram) {
      for (std::size_t i = 0; i < acc.rows(); ++i)
        for (std::size_t j = 0; j < acc.cols(); ++j) acc(i, j) += 0.5 * (gram(i, j) + gram(j, i));
    };
    accumulate(s.left, matmul_nt(g, g));
    accumulate(s.right, matmul_tn(g, g));
    try {
      const Matrix lp = matrix_fractional_power(s.left, -0.25);
      const Matrix rp = matrix_fractional_power(s.right, -0.25);
      return Proposal{matmul(matmul(lp, g), rp), lr, false, {}};
    } catch (const std::exception& e) {
      s = LayerState{};
      return skipped(g, lr, std::string("preconditioner root failed: ") + e.what());
    }
  });
}

StepReport step_muon(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                     std::span<const ScalingRule> rules, const StepOptions& opts) {
  const long t = state.step + 1;
  return run_layers(mlp, grads, state, hp, rules, opts,
                    [&](std::size_t l, const Matrix& g, const LayerState& cur, LayerState& s) {
    const LayerSpec& spec = mlp.layer(l).spec;
    if (spec.role != LayerRole::Hidden) {
      Proposal p = adamw_layer(mlp, l, g, cur, s, t, hp, rules[l]);
      p.note = "non-hidden layer stepped by adamw";
      return p;
    }
    const double lr = hp.eta * rules[l].lr_mult;
    s.momentum = cur.momentum.empty() ? g : cur.momentum * hp.mu + g;
    if (frobenius_norm(s.momentum) == 0.0) return skipped(g, lr, "zero momentum buffer");
    Orthogonalized o = newton_schulz_orthogonalize(s.momentum, hp.ns_iters);
    const EffectiveDims dims = effective_dims(spec);
    Proposal p{std::move(o.value), lr, false, {}};
    p.psi *= std::sqrt(static_cast<double>(dims.out) / static_cast<double>(dims.in));
    if (!o.converged) p.note = "newton-schulz did not reach tolerance";
    return p;
  });
}

StepReport step(OptimizerKind kind, Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                std::span<const ScalingRule> rules, const StepOptions& opts) {
  switch (kind) {
    case OptimizerKind::AdamW: return step_adamw(mlp, grads, state, hp, rules, opts);
    case OptimizerKind::Adopt: return step_adopt(mlp, grads, state, hp, rules, opts);
    case OptimizerKind::Lamb: return step_lamb(mlp, grads, state, hp, rules, opts);
    case OptimizerKind::Sophia: return step_sophia(mlp, grads, state, hp, rules, opts);
    case OptimizerKind::Shampoo: return step_shampoo(mlp, grads, state, hp, rules, opts);
    case OptimizerKind::Muon: return step_muon(mlp, grads, state, hp, rules, opts);
  }
  throw InvalidArgument("step: unknown optimizer");
}

}  // namespace mup

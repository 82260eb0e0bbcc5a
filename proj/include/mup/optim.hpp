#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mup/matrix.hpp"
#include "mup/model.hpp"
#include "mup/scaling.hpp"

namespace mup {

struct HyperParams {
  double eta = 1e-2;          // base learning rate
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;          // adaptive-noise floor
  double weight_decay = 0.0;  // lambda
  double gamma = 0.01;        // Sophia clipping scale
  double delta = 1e-8;        // Shampoo preconditioner init
  double mu = 0.95;           // Muon momentum
  int ns_iters = 100;         // Newton-Schulz iteration cap
  int hess_interval = 10;     // steps between Sophia Hessian refreshes

  /// Throws InvalidArgument when a field is outside its documented range.
  void validate() const;
};

struct LayerState {
  Matrix m;         // first moment
  Matrix v;         // second moment
  Matrix h;         // Sophia Hessian-diagonal EMA
  Matrix left;      // Shampoo L, fan_out x fan_out
  Matrix right;     // Shampoo R, fan_in x fan_in
  Matrix momentum;  // Muon B
};

struct OptState {
  std::vector<LayerState> layers;
  long step = 0;  // number of completed step calls
};

/// Zero accumulators sized for `mlp`; Shampoo's preconditioners start at delta * I.
OptState init_state(const Mlp& mlp, OptimizerKind kind, const HyperParams& hp);

struct LayerReport {
  double psi_spectral = 0.0;     // ||Psi||_*
  double update_spectral = 0.0;  // ||Delta W||_*
  double effective_lr = 0.0;     // eta * lr_mult
  std::size_t update_rank = 0;
  bool skipped = false;
  std::string note;
  Matrix delta;  // Delta W, kept only when StepOptions::keep_updates
};

struct StepReport {
  std::vector<LayerReport> layers;
};

struct StepOptions {
  bool measure = true;        // fill the spectral fields (costs an SVD per layer)
  bool keep_updates = false;  // copy Delta W into the report
};

/// All step functions compute every layer's update before touching the
/// model. A non-finite update throws NumericalError and leaves both the
/// model and the state unchanged.
StepReport step_adamw(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                      std::span<const ScalingRule> rules, const StepOptions& opts = {});
StepReport step_adopt(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                      std::span<const ScalingRule> rules, const StepOptions& opts = {});
StepReport step_lamb(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                     std::span<const ScalingRule> rules, const StepOptions& opts = {});
StepReport step_sophia(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                       std::span<const ScalingRule> rules, const StepOptions& opts = {});
StepReport step_shampoo(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                        std::span<const ScalingRule> rules, const StepOptions& opts = {});
StepReport step_muon(Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                     std::span<const ScalingRule> rules, const StepOptions& opts = {});

StepReport step(OptimizerKind kind, Mlp& mlp, const Grads& grads, OptState& state, const HyperParams& hp,
                std::span<const ScalingRule> rules, const StepOptions& opts = {});

/// Sophia's Hessian EMA: h <- beta2 * h + (1 - beta2) * estimate.
void update_hessian_ema(OptState& state, std::span<const Matrix> estimate, double beta2);

/// Rules for every layer of `mlp`.
std::vector<ScalingRule> derive_rules(const Mlp& mlp, OptimizerKind kind, ParamScheme scheme);

}  // namespace mup

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mup/model.hpp"
#include "mup/optim.hpp"
#include "mup/scaling.hpp"

namespace mup {

/// Owns a model, its optimizer state and per-layer rules, and runs
/// forward/backward/step on caller-supplied batches.
class Trainer {
 public:
  Trainer(Mlp mlp, OptimizerKind kind, ParamScheme scheme, HyperParams hp, LossKind loss,
          std::uint64_t seed = 0);

  /// One training step on (x, y). Sophia refreshes its Hessian EMA on this
  /// batch whenever the completed step count is a multiple of hess_interval.
  /// On NumericalError the model and optimizer state are left as they were.
  StepReport step(const Matrix& x, const Matrix& y, double* loss_out = nullptr);

  double evaluate(const Matrix& x, const Matrix& y) const;

  const Mlp& model() const noexcept { return mlp_; }
  const OptState& state() const noexcept { return state_; }
  std::span<const ScalingRule> rules() const noexcept { return rules_; }
  OptimizerKind kind() const noexcept { return kind_; }
  LossKind loss_kind() const noexcept { return loss_; }
  const HyperParams& hyper_params() const noexcept { return hp_; }
  StepOptions& step_options() noexcept { return step_opts_; }

 private:
  Mlp mlp_;
  OptimizerKind kind_;
  HyperParams hp_;
  LossKind loss_;
  std::vector<ScalingRule> rules_;
  OptState state_;
  StepOptions step_opts_{.measure = false, .keep_updates = false};
  std::mt19937_64 hess_rng_;
};

}  // namespace mup

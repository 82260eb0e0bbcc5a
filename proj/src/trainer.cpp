#include "mup/trainer.hpp"

#include "mup/hessian.hpp"

namespace mup {

Trainer::Trainer(Mlp mlp, OptimizerKind kind, ParamScheme scheme, HyperParams hp, LossKind loss,
                 std::uint64_t seed)
    : mlp_(std::move(mlp)),
      kind_(kind),
      hp_(hp),
      loss_(loss),
      rules_(derive_rules(mlp_, kind, scheme)),
      state_(init_state(mlp_, kind, hp)),
      hess_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  hp_.validate();
}

StepReport Trainer::step(const Matrix& x, const Matrix& y, double* loss_out) {
  const Grads grads = gradients(mlp_, x, y, loss_, loss_out);
  if (kind_ != OptimizerKind::Sophia || state_.step % hp_.hess_interval != 0)
    return mup::step(kind_, mlp_, grads, state_, hp_, rules_, step_opts_);

  OptState trial = state_;
  const auto rng_before = hess_rng_;
  try {
    const std::vector<Matrix> est = estimate_hessian_diag(mlp_, x, y, loss_, hess_rng_);
    update_hessian_ema(trial, est, hp_.beta2);
    StepReport report = mup::step(kind_, mlp_, grads, trial, hp_, rules_, step_opts_);
    state_ = std::move(trial);
    return report;
  } catch (...) {
    hess_rng_ = rng_before;
    throw;
  }
}

double Trainer::evaluate(const Matrix& x, const Matrix& y) const { return loss(forward(mlp_, x), y, loss_); }

}  // namespace mup

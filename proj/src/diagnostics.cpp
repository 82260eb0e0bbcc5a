#include "mup/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "mup/error.hpp"
#include "mup/linalg.hpp"
#include "mup/trainer.hpp"

namespace mup {

double rms_coordinate(const Matrix& h) {
  if (h.cols() == 0 || h.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < h.cols(); ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i) sq += h(i, j) * h(i, j);
    total += std::sqrt(sq / static_cast<double>(h.rows()));
  }
  return total / static_cast<double>(h.cols());
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void run_width(const CoordCheckSpec& spec, const TaskData& task, std::size_t width,
               std::vector<CoordCheckRecord>& out) {
  const std::vector<LayerSpec> specs = mlp_specs(task.input_dim, width, task.output_dim, spec.depth);
  Trainer trainer(build(specs, spec.scheme, spec.kind, spec.seed, spec.activation), spec.kind, spec.scheme,
                  spec.hp, task.loss, spec.seed);
  const Matrix probe = column_slice(task.val_x, 0, std::min(spec.probe_size, task.n_val()));

  // Same minibatch sequence at every width.
  std::mt19937_64 rng(spec.seed ^ 0xc0ffee1234ULL);
  std::uniform_int_distribution<std::size_t> pick(0, task.n_train() - 1);
  std::vector<std::size_t> idx(spec.batch_size);

  std::vector<double> first(spec.depth, 0.0);
  bool diverged = false;
  for (int s = 1; s <= spec.steps; ++s) {
    std::vector<double> rms(spec.depth, kNaN);
    if (!diverged) {
      const ForwardTrace trace = forward(trainer.model(), probe);
      for (std::size_t l = 0; l < spec.depth; ++l) rms[l] = rms_coordinate(trace.features[l + 1]);
      if (!std::all_of(rms.begin(), rms.end(), [](double v) { return std::isfinite(v); })) {
        diverged = true;
        std::fill(rms.begin(), rms.end(), kNaN);
      }
    }
    if (s == 1) first = rms;
    for (std::size_t l = 0; l < spec.depth; ++l) {
      CoordCheckRecord r;
      r.width = width;
      r.step = s;
      r.layer = l + 1;
      r.rms_coord = rms[l];
      r.rel_to_first = s == 1 ? (diverged ? kNaN : 1.0) : rms[l] / first[l];
      r.diverged = diverged;
      out.push_back(r);
    }
    if (diverged || s == spec.steps) continue;
    for (auto& i : idx) i = pick(rng);
    double batch_loss = 0.0;
    try {
      trainer.step(gather_columns(task.train_x, idx), gather_columns(task.train_y, idx), &batch_loss);
      if (!std::isfinite(batch_loss)) diverged = true;
    } catch (const NumericalError&) {
      diverged = true;
    }
  }
}

}  // namespace

std::vector<CoordCheckRecord> coordinate_check(const CoordCheckSpec& spec, const TaskData& task) {
  if (spec.widths.empty()) throw InvalidArgument("coordinate_check: no widths");
  if (!std::is_sorted(spec.widths.begin(), spec.widths.end()))
    throw InvalidArgument("coordinate_check: widths must be ascending");
  if (spec.steps < 1) throw InvalidArgument("coordinate_check: steps must be >= 1");
  if (spec.batch_size < 1) throw InvalidArgument("coordinate_check: batch_size must be >= 1");
  if (spec.probe_size < 1) throw InvalidArgument("coordinate_check: probe_size must be >= 1");
  if (task.n_train() == 0 || task.n_val() == 0) throw InvalidArgument("coordinate_check: empty task");
  std::vector<CoordCheckRecord> out;
  out.reserve(spec.widths.size() * static_cast<std::size_t>(spec.steps) * spec.depth);
  for (std::size_t width : spec.widths) run_width(spec, task, width, out);
  return out;
}

std::vector<SpectralProbe> spectral_probe(const Mlp& before, const Mlp& after) {
  if (before.depth() != after.depth()) throw InvalidArgument("spectral_probe: depth mismatch");
  const std::size_t width = after.layer(0).spec.fan_out;
  std::vector<SpectralProbe> out;
  out.reserve(after.depth());
  for (std::size_t l = 0; l < after.depth(); ++l) {
    const LayerSpec& spec = after.layer(l).spec;
    if (!(before.layer(l).spec == spec)) throw InvalidArgument("spectral_probe: architecture mismatch");
    const Matrix w = after.effective_weight(l);
    const Matrix dw = w - before.effective_weight(l);
    const SpectralNorm sw = spectral_norm(w);
    const SpectralNorm sdw = spectral_norm(dw);
    const EffectiveDims dims = effective_dims(spec);

    SpectralProbe p;
    p.layer = l + 1;
    p.width = width;
    p.role = spec.role;
    p.spec_w = sw.value;
    p.spec_dw = sdw.value;
    p.target = std::sqrt(static_cast<double>(dims.out) / static_cast<double>(dims.in));
    p.ratio_w = p.spec_w / p.target;
    p.ratio_dw = p.spec_dw / p.target;
    p.converged = sw.converged && sdw.converged;
    out.push_back(p);
  }
  return out;
}

std::vector<RankProbe> rank_probe(const Grads& grads, std::size_t batch_size, double rank_tol) {
  std::vector<RankProbe> out;
  out.reserve(grads.weights.size());
  for (const Matrix& g : grads.weights) {
    const std::vector<double> s = singular_values(g);
    RankProbe p;
    const double top = s.empty() ? 0.0 : s.front();
    if (top > 0.0) {
      const double cut = rank_tol * top;
      p.rank = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double x) { return x > cut; }));
      p.fro_over_spec = std::max(1.0, frobenius_norm(g) / top);  // SVD rounding can push it a few ulps under 1
    }
    p.within_batch_bound = p.rank <= batch_size;
    out.push_back(p);
  }
  return out;
}

std::vector<double> feature_grad_probe(const Mlp& mlp, const ForwardTrace& trace, const Grads& grads) {
  if (trace.batch() != 1) throw InvalidArgument("feature_grad_probe: needs a batch of one");
  if (grads.features.size() != mlp.depth() || trace.features.size() != mlp.depth() + 1)
    throw InvalidArgument("feature_grad_probe: trace or grads do not match the model");
  std::vector<double> out;
  out.reserve(mlp.depth());
  for (std::size_t l = 0; l < mlp.depth(); ++l) {
    const std::size_t n = mlp.layer(l).spec.fan_out;
    if (grads.features[l].rows() != n || grads.features[l].cols() != 1)
      throw InvalidArgument("feature_grad_probe: feature gradient shape mismatch at layer " + std::to_string(l + 1));
    out.push_back(frobenius_norm(grads.features[l]) * std::sqrt(static_cast<double>(n)));
  }
  return out;
}

}  // namespace mup

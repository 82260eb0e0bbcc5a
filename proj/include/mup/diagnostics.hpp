#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mup/linalg.hpp"
#include "mup/model.hpp"
#include "mup/optim.hpp"
#include "mup/scaling.hpp"
#include "mup/tasks.hpp"

namespace mup {

struct CoordCheckRecord {
  std::size_t width = 0;
  int step = 0;            // 1-based; step s is measured before the s-th update
  std::size_t layer = 0;   // 1-based, h_layer
  double rms_coord = 0.0;  // mean over the probe batch of ||h||_2 / sqrt(n)
  double rel_to_first = 0.0;
  bool diverged = false;   // non-finite loss or features; values are NaN from here on
};

struct CoordCheckSpec {
  std::vector<std::size_t> widths;
  std::size_t depth = 4;
  OptimizerKind kind = OptimizerKind::AdamW;
  ParamScheme scheme = ParamScheme::MuP;
  int steps = 5;
  std::uint64_t seed = 0;
  Activation activation = Activation::ReLU;
  HyperParams hp;
  std::size_t batch_size = 32;
  std::size_t probe_size = 64;  // leading validation columns used as the probe batch
};

/// Trains `steps` steps per width and records every layer's RMS coordinate
/// on the fixed probe batch at the start of each step. Records come back in
/// width, step, layer order.
std::vector<CoordCheckRecord> coordinate_check(const CoordCheckSpec& spec, const TaskData& task);

struct SpectralProbe {
  std::size_t layer = 0;  // 1-based
  std::size_t width = 0;  // hidden width of the model
  LayerRole role = LayerRole::Hidden;
  double spec_w = 0.0;
  double spec_dw = 0.0;
  double target = 0.0;  // sqrt(n_out_eff / n_in_eff)
  double ratio_w = 0.0;
  double ratio_dw = 0.0;
  bool converged = true;  // both power iterations converged
};

/// Per-layer spectral norms of W (after) and Delta W = after - before.
std::vector<SpectralProbe> spectral_probe(const Mlp& before, const Mlp& after);

struct RankProbe {
  std::size_t rank = 0;
  double fro_over_spec = 1.0;  // 1 for a zero gradient
  bool within_batch_bound = true;  // rank <= batch_size
};

std::vector<RankProbe> rank_probe(const Grads& grads, std::size_t batch_size,
                                  double rank_tol = kDefaultRankTol);

/// ||dL/dh_l||_2 * sqrt(n_l) per layer for a batch-1 trace.
std::vector<double> feature_grad_probe(const Mlp& mlp, const ForwardTrace& trace, const Grads& grads);

/// Mean over columns of ||h_j||_2 / sqrt(rows).
double rms_coordinate(const Matrix& h);

}  // namespace mup

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mup/matrix.hpp"
#include "mup/model.hpp"

namespace mup {

/// Maps a flat parameter vector to the loss gradient at that point.
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// One Hutchinson probe: z ⊙ (H z) for a Rademacher direction z, with the
/// Hessian-vector product taken as a central difference of `grad` at
/// params ± radius·z. Throws NumericalError on a non-finite product.
std::vector<double> hutchinson_probe(std::span<const double> params, const GradientFn& grad,
                                     double radius, std::mt19937_64& rng);

/// Probe radius 1e-4 * (1 + ||W||_F).
double hutchinson_radius(double param_norm);

/// Per-layer Hessian-diagonal estimate of the batch loss with respect to the
/// effective weights, averaged over `probes` Hutchinson draws. Each layer gets
/// its own direction and its own product, with the other layers held fixed,
/// and a radius from that layer's Frobenius norm. A non-finite product is
/// retried once with a ten times smaller radius before giving up.
std::vector<Matrix> estimate_hessian_diag(const Mlp& mlp, const Matrix& x, const Matrix& targets,
                                          LossKind kind, std::mt19937_64& rng, int probes = 1);

/// Flattens effective weights layer by layer, row-major.
std::vector<double> flatten_weights(const Mlp& mlp);
/// Inverse of flatten_weights.
void unflatten_weights(Mlp& mlp, std::span<const double> params);
std::vector<double> flatten(std::span<const Matrix> mats);

}  // namespace mup

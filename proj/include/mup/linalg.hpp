#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mup/matrix.hpp"

namespace mup {

inline constexpr double kDefaultRankTol = 1e-12;
inline constexpr double kSpectralTol = 1e-10;
inline constexpr int kSpectralMaxIter = 1000;
inline constexpr double kNewtonSchulzTol = 1e-3;
inline constexpr int kNewtonSchulzMaxIter = 100;

double frobenius_norm(const Matrix& a);

struct SpectralNorm {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Largest singular value by power iteration on a^T a.
///
/// The start vector comes from a fixed seed so repeated calls on the same
/// matrix are bit-identical. Convergence is declared when the estimate's
/// relative change drops to `tol`; otherwise the best estimate is returned
/// with `converged == false`.
SpectralNorm spectral_norm(const Matrix& a, double tol = kSpectralTol,
                           int max_iter = kSpectralMaxIter);

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]
};

/// Symmetric eigendecomposition. Rejects input whose asymmetry exceeds
/// 1e-10 relative to its largest entry.
EigenDecomposition sym_eig(const Matrix& s);

/// Pseudo-power sum_i lambda_i^p u_i u_i^T over eigenvalues above
/// rank_tol * lambda_max. Eigenvalues at or below the cut contribute zero
/// for every p, including negative ones.
Matrix matrix_fractional_power(const Matrix& s, double p, double rank_tol = kDefaultRankTol);

struct Orthogonalized {
  Matrix value;
  bool converged = false;
  int iterations = 0;
  /// max |s - 1| over singular values of `value` on the range of the input.
  double max_deviation = 0.0;
};

/// Polar factor U V^T of g via the cubic Newton-Schulz iteration
/// X <- 1.5 X - 0.5 X X^T X, started from g / ||g||_F.
Orthogonalized newton_schulz_orthogonalize(const Matrix& g, int iters = kNewtonSchulzMaxIter,
                                           double tol = kNewtonSchulzTol);

/// Singular values, descending (dense SVD).
std::vector<double> singular_values(const Matrix& a);

/// Count of singular values above rank_tol * sigma_max; zero for the zero matrix.
std::size_t numerical_rank(const Matrix& a, double rank_tol = kDefaultRankTol);

bool is_symmetric(const Matrix& s, double rel_tol = 1e-10);

}  // namespace mup

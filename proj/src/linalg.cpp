#include "mup/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "eigen_interop.hpp"
#include "mup/error.hpp"

namespace mup {

namespace {

constexpr std::uint64_t kPowerIterationSeed = 0x5eed5eed2024ULL;
// Newton-Schulz singular values at or below this are treated as null space.
constexpr double kNullSingular = 1e-6;

void require_nonempty(const Matrix& a, const char* op) {
  if (a.rows() == 0 || a.cols() == 0) throw InvalidArgument(std::string(op) + ": empty matrix");
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.values()) m = std::max(m, std::abs(x));
  return m;
}

Eigen::VectorXd descending(const Eigen::VectorXd& ascending) { return ascending.reverse(); }

}  // namespace

double frobenius_norm(const Matrix& a) {
  // Scaled accumulation keeps tiny and huge entries from under/overflowing.
  const double scale = max_abs(a);
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (double x : a.values()) {
    const double r = x / scale;
    sum += r * r;
  }
  return scale * std::sqrt(sum);
}

SpectralNorm spectral_norm(const Matrix& a, double tol, int max_iter) {
  require_nonempty(a, "spectral_norm");
  if (!(tol > 0.0)) throw InvalidArgument("spectral_norm: tol must be positive");
  if (max_iter < 1) throw InvalidArgument("spectral_norm: max_iter must be >= 1");
  if (max_abs(a) == 0.0) return {0.0, true, 0};

  const auto A = detail::view(a);
  std::mt19937_64 rng(kPowerIterationSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(A.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  v.normalize();

  SpectralNorm result;
  double previous = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd w = A * v;
    const double sigma = w.norm();
    result.value = std::max(result.value, sigma);
    result.iterations = it;
    if (it > 1 && std::abs(sigma - previous) <= tol * sigma) {
      result.converged = true;
      break;
    }
    previous = sigma;
    Eigen::VectorXd next = A.transpose() * w;
    const double n = next.norm();
    if (n == 0.0) {
      // Start vector landed in the null space; the estimate is exact (zero
      // component) only if the matrix is zero, which was handled above.
      result.converged = false;
      break;
    }
    v = next / n;
  }
  return result;
}

bool is_symmetric(const Matrix& s, double rel_tol) {
  if (s.rows() != s.cols()) return false;
  const double bound = rel_tol * std::max(1.0, max_abs(s));
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = i + 1; j < s.cols(); ++j)
      if (std::abs(s(i, j) - s(j, i)) > bound) return false;
  return true;
}

EigenDecomposition sym_eig(const Matrix& s) {
  require_nonempty(s, "sym_eig");
  if (s.rows() != s.cols()) throw InvalidArgument("sym_eig: matrix is not square");
  if (!s.all_finite()) throw NumericalError("sym_eig: non-finite input");
  if (!is_symmetric(s)) throw InvalidArgument("sym_eig: matrix is not symmetric within 1e-10");

  const detail::RowMajor sym = 0.5 * (detail::view(s) + detail::view(s).transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("sym_eig: eigensolver did not converge");

  const Eigen::VectorXd values = descending(solver.eigenvalues());
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  EigenDecomposition out;
  out.eigenvalues.assign(values.data(), values.data() + values.size());
  out.eigenvectors = detail::to_matrix(vectors);
  return out;
}

Matrix matrix_fractional_power(const Matrix& s, double p, double rank_tol) {
  if (!(rank_tol >= 0.0)) throw InvalidArgument("matrix_fractional_power: rank_tol must be >= 0");
  if (!std::isfinite(p)) throw InvalidArgument("matrix_fractional_power: non-finite exponent");
  const EigenDecomposition eig = sym_eig(s);
  const std::size_t n = s.rows();

  double magnitude = 0.0;
  for (double l : eig.eigenvalues) magnitude = std::max(magnitude, std::abs(l));
  if (magnitude == 0.0) return Matrix(n, n);
  const double lambda_max = eig.eigenvalues.front();
  const double cut = rank_tol * magnitude;
  if (eig.eigenvalues.back() < -cut) {
    throw InvalidArgument("matrix_fractional_power: matrix is not positive semidefinite (eigenvalue " +
                          std::to_string(eig.eigenvalues.back()) + ")");
  }
  if (lambda_max <= cut) return Matrix(n, n);

  std::vector<Eigen::Index> kept;
  for (std::size_t k = 0; k < eig.eigenvalues.size(); ++k)
    if (eig.eigenvalues[k] > cut) kept.push_back(static_cast<Eigen::Index>(k));

  const auto V = detail::view(eig.eigenvectors);
  Eigen::MatrixXd basis(V.rows(), static_cast<Eigen::Index>(kept.size()));
  Eigen::MatrixXd scaled(V.rows(), static_cast<Eigen::Index>(kept.size()));
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(kept.size()); ++c) {
    const double weight = std::pow(eig.eigenvalues[static_cast<std::size_t>(kept[c])], p);
    basis.col(c) = V.col(kept[c]);
    scaled.col(c) = weight * V.col(kept[c]);
  }
  Matrix out(n, n);
  detail::view(out).noalias() = scaled * basis.transpose();
  if (!out.all_finite()) throw NumericalError("matrix_fractional_power: non-finite result");
  return out;
}

Orthogonalized newton_schulz_orthogonalize(const Matrix& g, int iters, double tol) {
  require_nonempty(g, "newton_schulz_orthogonalize");
  if (iters < 1) throw InvalidArgument("newton_schulz_orthogonalize: iters must be >= 1");
  if (!(tol > 0.0)) throw InvalidArgument("newton_schulz_orthogonalize: tol must be positive");
  const double norm = frobenius_norm(g);
  if (norm == 0.0) throw InvalidArgument("newton_schulz_orthogonalize: zero input");
  if (!std::isfinite(norm)) throw NumericalError("newton_schulz_orthogonalize: non-finite input");

  const bool wide = g.rows() <= g.cols();
  detail::RowMajor x = detail::view(g) / norm;
  auto gram = [&](const detail::RowMajor& m) -> Eigen::MatrixXd {
    return wide ? Eigen::MatrixXd(m * m.transpose()) : Eigen::MatrixXd(m.transpose() * m);
  };
  auto deviation = [&](const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
      const double s = std::sqrt(std::max(solver.eigenvalues()[k], 0.0));
      if (s <= kNullSingular) continue;
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  };

  Orthogonalized out;
  bool check_due = false;
  int next_check = 0;
  for (int it = 0; it < iters; ++it) {
    const Eigen::MatrixXd a = gram(x);
    if (check_due && it >= next_check) {
      const double dev = deviation(a);
      if (dev <= tol) {
        out.value = detail::to_matrix(x);
        out.converged = true;
        out.iterations = it;
        out.max_deviation = dev;
        return out;
      }
      next_check = it + 4;
    }
    detail::RowMajor next = wide ? detail::RowMajor(1.5 * x - 0.5 * (a * x))
                                 : detail::RowMajor(1.5 * x - 0.5 * (x * a));
    const double change = (next - x).norm();
    x.swap(next);
    if (change <= tol) check_due = true;
  }
  out.max_deviation = deviation(gram(x));
  out.converged = out.max_deviation <= tol;
  out.iterations = iters;
  out.value = detail::to_matrix(x);
  if (!out.value.all_finite()) throw NumericalError("newton_schulz_orthogonalize: non-finite iterate");
  return out;
}

std::vector<double> singular_values(const Matrix& a) {
  require_nonempty(a, "singular_values");
  if (!a.all_finite()) throw NumericalError("singular_values: non-finite input");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(detail::view(a)));
  const Eigen::VectorXd& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

std::size_t numerical_rank(const Matrix& a, double rank_tol) {
  const std::vector<double> s = singular_values(a);
  if (s.empty() || s.front() == 0.0) return 0;
  const double cut = rank_tol * s.front();
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double x) { return x > cut; }));
}

}  // namespace mup

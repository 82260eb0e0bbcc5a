#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mup {

/// Dense real matrix in row-major order.
///
/// The universal carrier for weights, gradients, feature batches and
/// preconditioners. A default-constructed Matrix is empty (0x0) and only
/// serves as a placeholder; every operation in the library requires
/// positive dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of `entries`; throws if the count is not rows*cols or
  /// any entry is non-finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  static Matrix outer(std::span<const double> u, std::span<const double> v);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::span<const double> v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  std::vector<double> col(std::size_t j) const;

  bool all_finite() const noexcept;
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// a * b (dense product).
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// Elementwise product.
Matrix hadamard(const Matrix& a, const Matrix& b);
/// Largest absolute entrywise difference; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace mup

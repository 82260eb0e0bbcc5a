#pragma once

// Private bridge between mup::Matrix and Eigen. Not installed.

#include <Eigen/Dense>

#include "mup/matrix.hpp"

namespace mup::detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMajor>;
using View = Eigen::Map<RowMajor>;

inline ConstView view(const Matrix& m) {
  return ConstView(m.data(), static_cast<Eigen::Index>(m.rows()),
                   static_cast<Eigen::Index>(m.cols()));
}

inline View view(Matrix& m) {
  return View(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

template <typename Derived>
Matrix to_matrix(const Eigen::MatrixBase<Derived>& e) {
  Matrix out(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  view(out) = e;
  return out;
}

}  // namespace mup::detail

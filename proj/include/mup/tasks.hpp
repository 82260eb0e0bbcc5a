#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mup/matrix.hpp"
#include "mup/model.hpp"

namespace mup {

/// Samples are columns. Regression targets are output_dim x n; class
/// targets are 1 x n indices.
struct TaskData {
  Matrix train_x, train_y;
  Matrix val_x, val_y;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  LossKind loss = LossKind::MSE;

  std::size_t n_train() const { return train_x.cols(); }
  std::size_t n_val() const { return val_x.cols(); }
};

/// y = W2 tanh(W1 x) with W1 ~ N(0, 1/input_dim), W2 ~ N(0, 1/width).
struct Teacher {
  Matrix w1;
  Matrix w2;
  Matrix apply(const Matrix& x) const;
};

/// The teacher gen_teacher_student uses for `seed`.
Teacher make_teacher(std::uint64_t seed, std::size_t input_dim, std::size_t output_dim,
                     std::size_t teacher_width);

/// Standard-normal inputs; the first n_train columns of one stream train,
/// the next n_val validate.
TaskData gen_teacher_student(std::uint64_t seed, std::size_t input_dim, std::size_t output_dim,
                             std::size_t n_train, std::size_t n_val, std::size_t teacher_width);

/// Byte-level next-byte prediction. Each example's input is the sum of the
/// one-hot codes of its context bytes over the vocabulary of bytes present;
/// the target is the index of the following byte. The last
/// round(val_fraction * count) examples form the validation split.
TaskData load_text_corpus(const std::filesystem::path& path, std::size_t context_len, double val_fraction);

/// The same construction applied to an in-memory byte string.
TaskData text_task(std::string_view text, std::size_t context_len, double val_fraction);

/// Columns [first, first + count) of m.
Matrix column_slice(const Matrix& m, std::size_t first, std::size_t count);
/// Columns of m selected by `idx`, in order.
Matrix gather_columns(const Matrix& m, std::span<const std::size_t> idx);

}  // namespace mup

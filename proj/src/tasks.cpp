#include "mup/tasks.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mup/error.hpp"

namespace mup {

Matrix Teacher::apply(const Matrix& x) const {
  Matrix hidden = matmul(w1, x);
  for (double& v : hidden.values()) v = std::tanh(v);
  return matmul(w2, hidden);
}

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = stddev * normal(rng);
  return m;
}

Teacher sample_teacher(std::mt19937_64& rng, std::size_t input_dim, std::size_t output_dim,
                       std::size_t teacher_width) {
  Teacher t;
  t.w1 = gaussian(teacher_width, input_dim, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  t.w2 = gaussian(output_dim, teacher_width, 1.0 / std::sqrt(static_cast<double>(teacher_width)), rng);
  return t;
}

}  // namespace

Teacher make_teacher(std::uint64_t seed, std::size_t input_dim, std::size_t output_dim,
                     std::size_t teacher_width) {
  if (input_dim == 0 || output_dim == 0 || teacher_width == 0)
    throw InvalidArgument("teacher dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  return sample_teacher(rng, input_dim, output_dim, teacher_width);
}

Matrix column_slice(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.cols()) throw InvalidArgument("column_slice: range out of bounds");
  Matrix out(m.rows(), count);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, first + j);
  return out;
}

Matrix gather_columns(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(m.rows(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= m.cols()) throw InvalidArgument("gather_columns: index out of bounds");
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = m(i, idx[j]);
  }
  return out;
}

TaskData gen_teacher_student(std::uint64_t seed, std::size_t input_dim, std::size_t output_dim,
                             std::size_t n_train, std::size_t n_val, std::size_t teacher_width) {
  if (input_dim == 0 || output_dim == 0 || teacher_width == 0)
    throw InvalidArgument("teacher-student dimensions must be >= 1");
  if (n_train == 0 || n_val == 0) throw InvalidArgument("teacher-student splits must be nonempty");
  std::mt19937_64 rng(seed);
  const Teacher teacher = sample_teacher(rng, input_dim, output_dim, teacher_width);
  const Matrix x = gaussian(input_dim, n_train + n_val, 1.0, rng);
  const Matrix y = teacher.apply(x);

  TaskData data;
  data.train_x = column_slice(x, 0, n_train);
  data.train_y = column_slice(y, 0, n_train);
  data.val_x = column_slice(x, n_train, n_val);
  data.val_y = column_slice(y, n_train, n_val);
  data.input_dim = input_dim;
  data.output_dim = output_dim;
  data.loss = LossKind::MSE;
  return data;
}

TaskData text_task(std::string_view text, std::size_t context_len, double val_fraction) {
  if (context_len == 0) throw InvalidArgument("context_len must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InvalidArgument("val_fraction must lie in (0, 1)");
  if (text.size() <= context_len + 1)
    throw InvalidArgument("corpus has " + std::to_string(text.size()) + " bytes, need more than context_len + 1");

  std::array<int, 256> index{};
  index.fill(-1);
  for (unsigned char c : text) index[c] = 0;
  std::size_t vocab = 0;
  for (int& slot : index)
    if (slot == 0) slot = static_cast<int>(vocab++);

  const std::size_t count = text.size() - context_len;
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(count)));
  if (n_val == 0 || n_val >= count)
    throw InvalidArgument("val_fraction leaves an empty train or validation split");
  Matrix x(vocab, count);
  Matrix y(1, count);
  for (std::size_t e = 0; e < count; ++e) {
    for (std::size_t k = 0; k < context_len; ++k)
      x(static_cast<std::size_t>(index[static_cast<unsigned char>(text[e + k])]), e) += 1.0;
    y(0, e) = index[static_cast<unsigned char>(text[e + context_len])];
  }

  TaskData data;
  const std::size_t n_train = count - n_val;
  data.train_x = column_slice(x, 0, n_train);
  data.train_y = column_slice(y, 0, n_train);
  data.val_x = column_slice(x, n_train, n_val);
  data.val_y = column_slice(y, n_train, n_val);
  data.input_dim = vocab;
  data.output_dim = vocab;
  data.loss = LossKind::SoftmaxCE;
  return data;
}

TaskData load_text_corpus(const std::filesystem::path& path, std::size_t context_len, double val_fraction) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading corpus '" + path.string() + "'");
  const std::string text = buf.str();
  try {
    return text_task(text, context_len, val_fraction);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("corpus '" + path.string() + "': " + e.what());
  }
}

}  // namespace mup

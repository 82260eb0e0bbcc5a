#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mup/model.hpp"
#include "mup/optim.hpp"
#include "mup/scaling.hpp"
#include "mup/tasks.hpp"

namespace mup {

enum class TaskKind { TeacherStudent, CharLM };

std::string_view to_string(TaskKind kind);
TaskKind parse_task(std::string_view name);

struct ExperimentConfig {
  TaskKind task = TaskKind::TeacherStudent;
  // teacher-student
  std::size_t input_dim = 16;
  std::size_t output_dim = 4;
  std::size_t n_train = 2048;
  std::size_t n_val = 512;
  std::size_t teacher_width = 64;
  std::uint64_t data_seed = 1234;
  // char-lm
  std::string corpus;
  std::size_t context_len = 8;
  double val_fraction = 0.1;

  OptimizerKind optimizer = OptimizerKind::AdamW;
  ParamScheme scheme = ParamScheme::MuP;
  std::vector<std::size_t> widths{64, 128, 256, 512};
  std::size_t depth = 4;
  std::vector<double> lr_grid{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int steps = 500;
  std::size_t batch_size = 32;  // one value shared by every width
  std::size_t probe_size = 64;
  Activation activation = Activation::ReLU;
  std::optional<LossKind> loss;  // defaults to the task's natural loss
  HyperParams hp;

  /// Throws ConfigError on an inconsistent description.
  void validate() const;
  LossKind loss_kind() const;
};

/// Sets one key from its textual value. Keys are case-insensitive and
/// '-' is accepted for '_'. Throws ConfigError on unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// `key = value` lines, `#` starts a comment, lists are comma-separated.
/// Validation is left to the caller so command-line overrides can follow.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical `key = value` dump that parse_config reads back.
std::string to_config_text(const ExperimentConfig& cfg);

TaskData make_task(const ExperimentConfig& cfg);

}  // namespace mup

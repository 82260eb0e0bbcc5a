#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mup/config.hpp"
#include "mup/csv.hpp"
#include "mup/diagnostics.hpp"
#include "mup/tasks.hpp"

namespace mup {

struct ResultRow {
  std::size_t width = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  int steps = 0;  // completed steps
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool diverged = false;
};

/// Raises glibc's trim and mmap thresholds so the matrix-sized blocks a
/// training loop frees and reallocates every step stay mapped. No-op
/// elsewhere. Call once at program start.
void tune_allocator();

/// MUP_THREADS, or 0 (sequential) when unset or unparsable.
unsigned threads_from_env();

/// Trains one (width, lr, seed) cell and reports full-split losses.
ResultRow train_cell(const ExperimentConfig& cfg, const TaskData& task, std::size_t width, double lr,
                     std::uint64_t seed);

/// Every (width, lr, seed) cell in that nesting order. Cells run on up to
/// `threads` workers; results are placed by cell index, so the output does
/// not depend on the thread count.
std::vector<ResultRow> run_lr_sweep(const ExperimentConfig& cfg, const TaskData& task, unsigned threads);
std::vector<ResultRow> run_lr_sweep(const ExperimentConfig& cfg);

struct LrSummary {
  std::size_t width = 0;
  double lr = 0.0;
  double mean_val_loss = 0.0;  // over non-diverged seeds; NaN if all diverged
  std::size_t finite_seeds = 0;
};

/// Seed means in width, then grid order.
std::vector<LrSummary> summarize(const std::vector<ResultRow>& rows);

struct BestLr {
  std::size_t width = 0;
  double lr = 0.0;
  std::size_t grid_index = 0;  // index into the sweep's lr grid
  double mean_val_loss = 0.0;
};

/// argmin of the seed-mean validation loss per width; widths with every lr
/// diverged are left out.
std::vector<BestLr> best_lr_per_width(const std::vector<ResultRow>& rows, const std::vector<double>& lr_grid);

/// Coordinate check over cfg.widths with the first seed.
std::vector<CoordCheckRecord> run_coord_check(const ExperimentConfig& cfg, const TaskData& task);

struct ProbeRow {
  SpectralProbe probe;
  std::size_t grad_rank = 0;
  double grad_fro_over_spec = 1.0;
};

/// One step per width on a single training example with eta = lr_grid[0].
std::vector<ProbeRow> run_spectral_probe(const ExperimentConfig& cfg, const TaskData& task);

CsvTable sweep_table(const std::vector<ResultRow>& rows);
CsvTable coord_table(const std::vector<CoordCheckRecord>& records);
CsvTable probe_table(const std::vector<ProbeRow>& rows);

}  // namespace mup

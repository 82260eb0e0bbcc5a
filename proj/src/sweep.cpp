#include "mup/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <random>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "mup/error.hpp"
#include "mup/hessian.hpp"
#include "mup/text.hpp"
#include "mup/trainer.hpp"

namespace mup {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kBatchStream = 0xba7c4e5eedULL;
}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
}

unsigned threads_from_env() {
  const char* raw = std::getenv("MUP_THREADS");
  if (raw == nullptr) return 0;
  try {
    const long long v = parse_int(raw);
    return v > 0 ? static_cast<unsigned>(v) : 0;
  } catch (const InvalidArgument&) {
    return 0;
  }
}

ResultRow train_cell(const ExperimentConfig& cfg, const TaskData& task, std::size_t width, double lr,
                     std::uint64_t seed) {
  ResultRow row{width, lr, seed, 0, kNaN, kNaN, false};
  const std::vector<LayerSpec> specs = mlp_specs(task.input_dim, width, task.output_dim, cfg.depth);
  HyperParams hp = cfg.hp;
  hp.eta = lr;
  Trainer trainer(build(specs, cfg.scheme, cfg.optimizer, seed, cfg.activation), cfg.optimizer, cfg.scheme, hp,
                  cfg.loss_kind(), seed);

  std::mt19937_64 rng(seed ^ kBatchStream);
  std::uniform_int_distribution<std::size_t> pick(0, task.n_train() - 1);
  std::vector<std::size_t> idx(cfg.batch_size);
  for (int t = 0; t < cfg.steps; ++t) {
    for (auto& i : idx) i = pick(rng);
    double batch_loss = 0.0;
    try {
      trainer.step(gather_columns(task.train_x, idx), gather_columns(task.train_y, idx), &batch_loss);
    } catch (const NumericalError&) {
      row.diverged = true;
      return row;
    }
    if (!std::isfinite(batch_loss)) {
      row.diverged = true;
      return row;
    }
    row.steps = t + 1;
  }
  row.train_loss = trainer.evaluate(task.train_x, task.train_y);
  row.val_loss = trainer.evaluate(task.val_x, task.val_y);
  if (!std::isfinite(row.train_loss) || !std::isfinite(row.val_loss)) {
    row.diverged = true;
    row.train_loss = row.val_loss = kNaN;
  }
  return row;
}

std::vector<ResultRow> run_lr_sweep(const ExperimentConfig& cfg, const TaskData& task, unsigned threads) {
  cfg.validate();
  struct Cell {
    std::size_t width;
    double lr;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t w : cfg.widths)
    for (double lr : cfg.lr_grid)
      for (std::uint64_t s : cfg.seeds) cells.push_back({w, lr, s});

  std::vector<ResultRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        rows[i] = train_cell(cfg, task, cells[i].width, cells[i].lr, cells[i].seed);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_workers = std::min<std::size_t>(threads, cells.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t k = 0; k < n_workers; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::vector<ResultRow> run_lr_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_lr_sweep(cfg, make_task(cfg), threads_from_env());
}

std::vector<LrSummary> summarize(const std::vector<ResultRow>& rows) {
  std::vector<LrSummary> out;
  for (const ResultRow& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const LrSummary& s) { return s.width == r.width && s.lr == r.lr; });
    if (it == out.end()) {
      out.push_back({r.width, r.lr, 0.0, 0});
      it = out.end() - 1;
    }
    if (!r.diverged) {
      it->mean_val_loss += r.val_loss;
      ++it->finite_seeds;
    }
  }
  for (LrSummary& s : out)
    s.mean_val_loss = s.finite_seeds ? s.mean_val_loss / static_cast<double>(s.finite_seeds) : kNaN;
  return out;
}

std::vector<BestLr> best_lr_per_width(const std::vector<ResultRow>& rows, const std::vector<double>& lr_grid) {
  std::vector<BestLr> out;
  for (const LrSummary& s : summarize(rows)) {
    if (!std::isfinite(s.mean_val_loss)) continue;
    const auto g = std::find(lr_grid.begin(), lr_grid.end(), s.lr);
    if (g == lr_grid.end()) throw InvalidArgument("best_lr_per_width: lr " + format_number(s.lr) + " not in grid");
    const auto gi = static_cast<std::size_t>(g - lr_grid.begin());
    auto it = std::find_if(out.begin(), out.end(), [&](const BestLr& b) { return b.width == s.width; });
    if (it == out.end()) {
      out.push_back({s.width, s.lr, gi, s.mean_val_loss});
    } else if (s.mean_val_loss < it->mean_val_loss) {
      *it = {s.width, s.lr, gi, s.mean_val_loss};
    }
  }
  return out;
}

std::vector<CoordCheckRecord> run_coord_check(const ExperimentConfig& cfg, const TaskData& task) {
  cfg.validate();
  CoordCheckSpec spec;
  spec.widths = cfg.widths;
  spec.depth = cfg.depth;
  spec.kind = cfg.optimizer;
  spec.scheme = cfg.scheme;
  spec.steps = cfg.steps;
  spec.seed = cfg.seeds.front();
  spec.activation = cfg.activation;
  spec.hp = cfg.hp;
  spec.hp.eta = cfg.lr_grid.front();
  spec.batch_size = cfg.batch_size;
  spec.probe_size = cfg.probe_size;
  return coordinate_check(spec, task);
}

std::vector<ProbeRow> run_spectral_probe(const ExperimentConfig& cfg, const TaskData& task) {
  cfg.validate();
  const Matrix x = column_slice(task.train_x, 0, 1);
  const Matrix y = column_slice(task.train_y, 0, 1);
  std::vector<ProbeRow> out;
  for (std::size_t w : cfg.widths) {
    const std::vector<LayerSpec> specs = mlp_specs(task.input_dim, w, task.output_dim, cfg.depth);
    Mlp mlp = build(specs, cfg.scheme, cfg.optimizer, cfg.seeds.front(), cfg.activation);
    const Mlp before = mlp;
    const Grads grads = gradients(mlp, x, y, cfg.loss_kind());
    HyperParams hp = cfg.hp;
    hp.eta = cfg.lr_grid.front();
    const std::vector<ScalingRule> rules = derive_rules(mlp, cfg.optimizer, cfg.scheme);
    OptState state = init_state(mlp, cfg.optimizer, hp);
    if (cfg.optimizer == OptimizerKind::Sophia) {
      std::mt19937_64 rng(cfg.seeds.front());
      update_hessian_ema(state, estimate_hessian_diag(mlp, x, y, cfg.loss_kind(), rng), hp.beta2);
    }
    step(cfg.optimizer, mlp, grads, state, hp, rules, StepOptions{.measure = false, .keep_updates = false});
    const std::vector<SpectralProbe> probes = spectral_probe(before, mlp);
    const std::vector<RankProbe> ranks = rank_probe(grads, 1);
    for (std::size_t l = 0; l < probes.size(); ++l)
      out.push_back({probes[l], ranks[l].rank, ranks[l].fro_over_spec});
  }
  return out;
}

CsvTable sweep_table(const std::vector<ResultRow>& rows) {
  CsvTable t;
  t.header = split(kSweepHeader, ',');
  for (const ResultRow& r : rows)
    t.rows.push_back({std::to_string(r.width), format_number(r.lr), std::to_string(r.seed), std::to_string(r.steps),
                      format_number(r.train_loss), format_number(r.val_loss), r.diverged ? "1" : "0"});
  return t;
}

CsvTable coord_table(const std::vector<CoordCheckRecord>& records) {
  CsvTable t;
  t.header = split(kCoordCheckHeader, ',');
  for (const CoordCheckRecord& r : records)
    t.rows.push_back({std::to_string(r.width), std::to_string(r.step), std::to_string(r.layer),
                      format_number(r.rms_coord), format_number(r.rel_to_first)});
  return t;
}

CsvTable probe_table(const std::vector<ProbeRow>& rows) {
  CsvTable t;
  t.header = split(kProbeHeader, ',');
  for (const ProbeRow& r : rows) {
    const SpectralProbe& p = r.probe;
    t.rows.push_back({std::to_string(p.width), std::to_string(p.layer), std::string(to_string(p.role)),
                      format_number(p.spec_w), format_number(p.spec_dw), format_number(p.target),
                      format_number(p.ratio_w), format_number(p.ratio_dw), std::to_string(r.grad_rank),
                      format_number(r.grad_fro_over_spec)});
  }
  return t;
}

}  // namespace mup

#include "mup/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>

#include "mup/config.hpp"
#include "mup/csv.hpp"
#include "mup/error.hpp"
#include "mup/plot.hpp"
#include "mup/scaling.hpp"
#include "mup/sweep.hpp"
#include "mup/text.hpp"

namespace mup {

namespace {

// Flags shared by the experiment subcommands; each overrides the config key
// of the same name.
struct CommonFlags {
  std::string config;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  for (const char* key : {"optimizer", "scheme", "widths", "depth", "lr-grid", "seeds", "steps"})
    cmd->add_option(std::string("--") + key, f.values[key]);
  cmd->add_option("--set", f.sets, "extra KEY=VALUE override (repeatable)");
  cmd->add_option("--out", f.out, "output file (default: stdout)");
}

ExperimentConfig resolve(CLI::App* cmd, const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  for (const auto& [key, value] : f.values)
    if (cmd->count("--" + key) > 0) apply_setting(cfg, key, value);
  for (const std::string& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void emit(const std::string& path, const CsvTable& table, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << to_csv(table);
  } else {
    write_csv(path, table);
  }
}

void print_summary(const std::vector<ResultRow>& rows, const ExperimentConfig& cfg, std::ostream& os) {
  os << "# seed-mean validation loss\n# width\tlr\tmean_val_loss\tfinite_seeds\n";
  for (const LrSummary& s : summarize(rows))
    os << "# " << s.width << '\t' << format_number(s.lr) << '\t' << format_number(s.mean_val_loss) << '\t'
       << s.finite_seeds << '\n';
  for (const BestLr& b : best_lr_per_width(rows, cfg.lr_grid))
    os << "# best width=" << b.width << " lr=" << format_number(b.lr) << " val_loss=" << format_number(b.mean_val_loss)
       << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"muP spectral-condition experiments"};
  app.name("mup");
  app.require_subcommand(1, 1);

  CommonFlags coord_f, sweep_f, probe_f;
  auto* coord = app.add_subcommand("coord-check", "coordinate check across widths (CSV)");
  add_common(coord, coord_f);
  auto* sweep = app.add_subcommand("lr-sweep", "width x learning-rate x seed sweep (CSV)");
  add_common(sweep, sweep_f);
  auto* probe = app.add_subcommand("probe", "one-step spectral probe per width (CSV)");
  add_common(probe, probe_f);

  auto* rules = app.add_subcommand("rules", "print the per-layer scaling rules");
  std::string r_opt = "adamw", r_scheme = "mup", r_widths = "128,256", r_config;
  std::size_t r_depth = 4;
  rules->add_option("--optimizer", r_opt);
  rules->add_option("--scheme", r_scheme);
  rules->add_option("--widths", r_widths);
  rules->add_option("--depth", r_depth);
  rules->add_option("--config", r_config, "take input/output dims from a config");

  auto* plot = app.add_subcommand("plot", "render a CSV produced by coord-check or lr-sweep as SVG");
  std::string p_in, p_kind, p_out;
  std::size_t p_layer = 0;
  plot->add_option("--in", p_in)->required();
  plot->add_option("--kind", p_kind, "loss_vs_lr_by_width | coord_check_by_width")->required();
  plot->add_option("--layer", p_layer, "coord-check layer (default: last)");
  plot->add_option("--out", p_out)->required();

  std::vector<const char*> argv{"mup"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mup: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (coord->parsed()) {
      const ExperimentConfig cfg = resolve(coord, coord_f);
      emit(coord_f.out, coord_table(run_coord_check(cfg, make_task(cfg))), out);
    } else if (sweep->parsed()) {
      const ExperimentConfig cfg = resolve(sweep, sweep_f);
      const std::vector<ResultRow> rows = run_lr_sweep(cfg, make_task(cfg), threads_from_env());
      emit(sweep_f.out, sweep_table(rows), out);
      print_summary(rows, cfg, sweep_f.out.empty() || sweep_f.out == "-" ? err : out);
    } else if (probe->parsed()) {
      const ExperimentConfig cfg = resolve(probe, probe_f);
      emit(probe_f.out, probe_table(run_spectral_probe(cfg, make_task(cfg))), out);
    } else if (rules->parsed()) {
      ExperimentConfig cfg = r_config.empty() ? ExperimentConfig{} : load_config(r_config);
      apply_setting(cfg, "widths", r_widths);
      std::size_t in_dim = cfg.input_dim, out_dim = cfg.output_dim;
      if (cfg.task == TaskKind::CharLM) {
        const TaskData task = make_task(cfg);
        in_dim = task.input_dim;
        out_dim = task.output_dim;
      }
      out << rule_table(parse_optimizer(r_opt), cfg.widths, r_depth, parse_scheme(r_scheme), in_dim, out_dim);
    } else if (plot->parsed()) {
      PlotOptions opts;
      if (plot->count("--layer") > 0) opts.layer = p_layer;
      emit_plot(read_csv(p_in), parse_plot_kind(p_kind), p_out, opts);
    }
  } catch (const ConfigError& e) {
    err << "mup: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "mup: i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "mup: numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    err << "mup: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "mup: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace mup

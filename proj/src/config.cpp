#include "mup/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mup/error.hpp"
#include "mup/text.hpp"

namespace mup {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::TeacherStudent ? "teacher_student" : "char_lm";
}

TaskKind parse_task(std::string_view name) {
  std::string n = to_lower(trim(name));
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "teacher_student") return TaskKind::TeacherStudent;
  if (n == "char_lm") return TaskKind::CharLM;
  throw InvalidArgument("unknown task '" + std::string(name) + "'");
}

namespace {

// Accepts plain decimals and powers written as base^exp (2^-3).
double parse_real(std::string_view s) {
  const auto t = trim(s);
  const auto caret = t.find('^');
  double v = caret == std::string_view::npos
                 ? parse_double(t)
                 : std::pow(parse_double(t.substr(0, caret)), parse_double(t.substr(caret + 1)));
  if (!std::isfinite(v)) throw InvalidArgument("not a finite number: '" + std::string(s) + "'");
  return v;
}

std::size_t parse_count(std::string_view s) {
  const long long v = parse_int(s);
  if (v < 0) throw InvalidArgument("expected a nonnegative integer, got '" + std::string(s) + "'");
  return static_cast<std::size_t>(v);
}

template <class T, class F>
std::vector<T> parse_list(std::string_view s, F&& one) {
  std::vector<T> out;
  for (const std::string& item : split(s, ',')) {
    if (trim(item).empty()) throw InvalidArgument("empty list element in '" + std::string(s) + "'");
    out.push_back(one(item));
  }
  return out;
}

std::string normalize_key(std::string_view key) {
  std::string k = to_lower(trim(key));
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"task", [](auto& c, auto v) { c.task = parse_task(v); }},
      {"input_dim", [](auto& c, auto v) { c.input_dim = parse_count(v); }},
      {"output_dim", [](auto& c, auto v) { c.output_dim = parse_count(v); }},
      {"n_train", [](auto& c, auto v) { c.n_train = parse_count(v); }},
      {"n_val", [](auto& c, auto v) { c.n_val = parse_count(v); }},
      {"teacher_width", [](auto& c, auto v) { c.teacher_width = parse_count(v); }},
      {"data_seed", [](auto& c, auto v) { c.data_seed = parse_count(v); }},
      {"corpus", [](auto& c, auto v) { c.corpus = std::string(trim(v)); }},
      {"context_len", [](auto& c, auto v) { c.context_len = parse_count(v); }},
      {"val_fraction", [](auto& c, auto v) { c.val_fraction = parse_real(v); }},
      {"optimizer", [](auto& c, auto v) { c.optimizer = parse_optimizer(v); }},
      {"scheme", [](auto& c, auto v) { c.scheme = parse_scheme(v); }},
      {"widths", [](auto& c, auto v) { c.widths = parse_list<std::size_t>(v, parse_count); }},
      {"depth", [](auto& c, auto v) { c.depth = parse_count(v); }},
      {"lr_grid", [](auto& c, auto v) { c.lr_grid = parse_list<double>(v, parse_real); }},
      {"seeds", [](auto& c, auto v) {
         c.seeds = parse_list<std::uint64_t>(v, [](std::string_view s) { return std::uint64_t{parse_count(s)}; });
       }},
      {"steps", [](auto& c, auto v) { c.steps = static_cast<int>(parse_int(v)); }},
      {"batch_size", [](auto& c, auto v) {
         if (v.find(',') != std::string_view::npos)
           throw InvalidArgument("batch_size takes a single value; the batch is held fixed across widths");
         c.batch_size = parse_count(v);
       }},
      {"probe_size", [](auto& c, auto v) { c.probe_size = parse_count(v); }},
      {"activation", [](auto& c, auto v) { c.activation = parse_activation(v); }},
      {"loss", [](auto& c, auto v) { c.loss = parse_loss(v); }},
      {"beta1", [](auto& c, auto v) { c.hp.beta1 = parse_real(v); }},
      {"beta2", [](auto& c, auto v) { c.hp.beta2 = parse_real(v); }},
      {"eps", [](auto& c, auto v) { c.hp.eps = parse_real(v); }},
      {"weight_decay", [](auto& c, auto v) { c.hp.weight_decay = parse_real(v); }},
      {"gamma", [](auto& c, auto v) { c.hp.gamma = parse_real(v); }},
      {"delta", [](auto& c, auto v) { c.hp.delta = parse_real(v); }},
      {"mu", [](auto& c, auto v) { c.hp.mu = parse_real(v); }},
      {"ns_iters", [](auto& c, auto v) { c.hp.ns_iters = static_cast<int>(parse_int(v)); }},
      {"hess_interval", [](auto& c, auto v) { c.hp.hess_interval = static_cast<int>(parse_int(v)); }},
  };
  return table;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

}  // namespace

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const std::string k = normalize_key(key);
  const auto it = setters().find(k);
  if (it == setters().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  try {
    it->second(cfg, trim(value));
  } catch (const InvalidArgument& e) {
    throw ConfigError("bad value for '" + k + "': " + e.what());
  }
}

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
  ExperimentConfig cfg;
  std::size_t lineno = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    if (trim(line.substr(0, eq)).empty()) throw ConfigError(where + "missing key");
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (widths.empty()) fail("widths must be nonempty");
  if (!std::is_sorted(widths.begin(), widths.end()) ||
      std::adjacent_find(widths.begin(), widths.end()) != widths.end())
    fail("widths must be strictly ascending");
  if (widths.front() == 0) fail("widths must be >= 1");
  if (depth < 2) fail("depth must be >= 2");
  if (lr_grid.empty()) fail("lr_grid must be nonempty");
  for (double lr : lr_grid)
    if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr_grid entries must be finite and >= 0");
  if (seeds.empty()) fail("seeds must be nonempty");
  if (steps < 1) fail("steps must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (probe_size < 1) fail("probe_size must be >= 1");
  if (task == TaskKind::TeacherStudent) {
    if (input_dim < 1 || output_dim < 1 || teacher_width < 1) fail("teacher-student dimensions must be >= 1");
    if (n_train < 1 || n_val < 1) fail("n_train and n_val must be >= 1");
    if (loss && *loss != LossKind::MSE) fail("teacher_student needs loss = mse");
  } else {
    if (corpus.empty()) fail("char_lm needs a corpus path");
    if (context_len < 1) fail("context_len must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("val_fraction must lie in (0, 1)");
    if (loss && *loss != LossKind::SoftmaxCE) fail("char_lm needs loss = softmax_ce");
  }
  try {
    hp.validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
}

LossKind ExperimentConfig::loss_kind() const {
  if (loss) return *loss;
  return task == TaskKind::TeacherStudent ? LossKind::MSE : LossKind::SoftmaxCE;
}

std::string to_config_text(const ExperimentConfig& c) {
  auto num = [](auto x) { return format_number(static_cast<double>(x)); };
  std::ostringstream o;
  o << "task = " << to_string(c.task) << '\n';
  if (c.task == TaskKind::TeacherStudent) {
    o << "input_dim = " << c.input_dim << "\noutput_dim = " << c.output_dim << "\nn_train = " << c.n_train
      << "\nn_val = " << c.n_val << "\nteacher_width = " << c.teacher_width << "\ndata_seed = " << c.data_seed
      << '\n';
  } else {
    o << "corpus = " << c.corpus << "\ncontext_len = " << c.context_len << "\nval_fraction = " << num(c.val_fraction)
      << '\n';
  }
  o << "optimizer = " << to_string(c.optimizer) << "\nscheme = " << to_string(c.scheme) << '\n';
  o << "widths = " << join(c.widths, [](std::size_t w) { return std::to_string(w); }) << '\n';
  o << "depth = " << c.depth << '\n';
  o << "lr_grid = " << join(c.lr_grid, [](double x) { return format_number(x); }) << '\n';
  o << "seeds = " << join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n';
  o << "steps = " << c.steps << "\nbatch_size = " << c.batch_size << "\nprobe_size = " << c.probe_size << '\n';
  o << "activation = " << to_string(c.activation) << "\nloss = " << to_string(c.loss_kind()) << '\n';
  o << "beta1 = " << num(c.hp.beta1) << "\nbeta2 = " << num(c.hp.beta2) << "\neps = " << num(c.hp.eps)
    << "\nweight_decay = " << num(c.hp.weight_decay) << "\ngamma = " << num(c.hp.gamma)
    << "\ndelta = " << num(c.hp.delta) << "\nmu = " << num(c.hp.mu) << "\nns_iters = " << c.hp.ns_iters
    << "\nhess_interval = " << c.hp.hess_interval << '\n';
  return o.str();
}

TaskData make_task(const ExperimentConfig& cfg) {
  if (cfg.task == TaskKind::TeacherStudent)
    return gen_teacher_student(cfg.data_seed, cfg.input_dim, cfg.output_dim, cfg.n_train, cfg.n_val,
                               cfg.teacher_width);
  return load_text_corpus(cfg.corpus, cfg.context_len, cfg.val_fraction);
}

}  // namespace mup

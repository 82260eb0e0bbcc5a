// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run every criterion
//   acceptance 3 7 10     run a subset

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mup/config.hpp"
#include "mup/csv.hpp"
#include "mup/diagnostics.hpp"
#include "mup/error.hpp"
#include "mup/hessian.hpp"
#include "mup/linalg.hpp"
#include "mup/model.hpp"
#include "mup/optim.hpp"
#include "mup/scaling.hpp"
#include "mup/sweep.hpp"
#include "mup/tasks.hpp"

using namespace mup;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

Matrix randn(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (double& x : m.values()) x = n(rng);
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

const std::vector<std::size_t> kWidths{64, 128, 256, 512, 1024};
const OptimizerKind kAllKinds[] = {OptimizerKind::AdamW, OptimizerKind::Adopt, OptimizerKind::Lamb,
                                   OptimizerKind::Sophia, OptimizerKind::Shampoo, OptimizerKind::Muon};

// ---------------------------------------------------------------------------

Outcome rank_one_gradients() {
  std::mt19937_64 rng(101);
  double worst_ratio = 1.0;
  std::size_t bad = 0, checked = 0;
  for (std::size_t depth = 2; depth <= 4; ++depth) {
    for (std::size_t w = 8; w <= 256; w *= 2) {
      const Mlp m = build(mlp_specs(16, w, 4, depth), ParamScheme::MuP, OptimizerKind::AdamW, rng(),
                          Activation::Identity);
      const Matrix x = randn(16, 1, rng), y = randn(4, 1, rng);
      for (const RankProbe& p : rank_probe(gradients(m, x, y, LossKind::MSE), 1)) {
        ++checked;
        worst_ratio = std::max(worst_ratio, p.fro_over_spec);
        if (p.rank != 1 || p.fro_over_spec < 1.0 || p.fro_over_spec > 1.0 + 1e-6) ++bad;
      }
    }
  }
  return {bad == 0, std::to_string(checked) + " layers, max fro/spec - 1 = " + fmt(worst_ratio - 1.0)};
}

// ---------------------------------------------------------------------------

bool near_relu_kink(const Mlp& m, const Matrix& x, double margin = 1e-3) {
  if (m.activation() != Activation::ReLU) return false;
  const ForwardTrace t = forward(m, x);
  for (std::size_t l = 1; l < m.depth(); ++l)
    for (double h : t.features[l].values())
      if (std::abs(h) < margin) return true;
  return false;
}

Outcome gradient_exactness() {
  std::mt19937_64 rng(202);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  double worst = 0.0;
  int nets = 0;
  while (nets < 100) {
    const std::size_t depth = pick(2, 4), width = pick(2, 6), in = pick(1, 4), out = pick(2, 3), batch = pick(1, 4);
    const Activation act = std::array{Activation::Identity, Activation::ReLU, Activation::Tanh}[pick(0, 2)];
    const LossKind kind = pick(0, 1) ? LossKind::MSE : LossKind::SoftmaxCE;
    const ParamScheme scheme = pick(0, 1) ? ParamScheme::MuP : ParamScheme::SP;
    Mlp m = build(mlp_specs(in, width, out, depth), scheme, OptimizerKind::AdamW, rng(), act);
    const Matrix x = randn(in, batch, rng);
    if (near_relu_kink(m, x)) continue;
    Matrix y;
    if (kind == LossKind::MSE) {
      y = randn(out, batch, rng);
    } else {
      y = Matrix(1, batch);
      for (double& t : y.values()) t = static_cast<double>(pick(0, out - 1));
    }
    ++nets;
    const Grads g = gradients(m, x, y, kind);
    const double h = 1e-6;
    for (std::size_t l = 0; l < depth; ++l) {
      const Matrix w0 = m.effective_weight(l);
      for (std::size_t k = 0; k < w0.size(); ++k) {
        Matrix wp = w0, wm = w0;
        wp.values()[k] += h;
        wm.values()[k] -= h;
        m.set_effective_weight(l, wp);
        const double lp = loss(forward(m, x), y, kind);
        m.set_effective_weight(l, wm);
        const double lm = loss(forward(m, x), y, kind);
        m.set_effective_weight(l, w0);
        const double fd = (lp - lm) / (2 * h);
        const double an = g.weights[l].values()[k];
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
      }
    }
  }
  return {worst <= 1e-4, "100 networks, worst relative error " + fmt(worst)};
}

// ---------------------------------------------------------------------------

Monomial mono(long on, long od, long in_n, long in_d) { return Monomial{Rational(on, od), Rational(in_n, in_d)}; }

Outcome table_fidelity() {
  // Cells in the table's variables: n_l (out), n_{l-1} (in).
  const Monomial one = mono(0, 1, 0, 1);
  struct Cell {
    OptimizerKind kind;
    LayerRole role;
    std::optional<Monomial> lr;
  };
  const Cell cells[] = {
      {OptimizerKind::AdamW, LayerRole::Input, one},          {OptimizerKind::AdamW, LayerRole::Output, mono(0, 1, -1, 1)},
      {OptimizerKind::AdamW, LayerRole::Hidden, mono(0, 1, -1, 1)},
      {OptimizerKind::Adopt, LayerRole::Input, one},          {OptimizerKind::Adopt, LayerRole::Output, mono(0, 1, -1, 1)},
      {OptimizerKind::Adopt, LayerRole::Hidden, mono(0, 1, -1, 1)},
      {OptimizerKind::Sophia, LayerRole::Input, one},         {OptimizerKind::Sophia, LayerRole::Output, mono(0, 1, -1, 1)},
      {OptimizerKind::Sophia, LayerRole::Hidden, mono(0, 1, -1, 1)},
      {OptimizerKind::Lamb, LayerRole::Input, one},           {OptimizerKind::Lamb, LayerRole::Output, one},
      {OptimizerKind::Lamb, LayerRole::Hidden, one},
      {OptimizerKind::Shampoo, LayerRole::Input, mono(1, 2, 0, 1)},
      {OptimizerKind::Shampoo, LayerRole::Output, mono(0, 1, -1, 2)},
      {OptimizerKind::Shampoo, LayerRole::Hidden, mono(1, 2, -1, 2)},
      {OptimizerKind::Muon, LayerRole::Input, std::nullopt},  {OptimizerKind::Muon, LayerRole::Output, std::nullopt},
      {OptimizerKind::Muon, LayerRole::Hidden, one},
  };
  const Monomial multiplier[] = {mono(0, 1, -1, 2), mono(0, 1, -1, 1), mono(0, 1, -1, 2)};
  int mismatches = 0, entries = 0;
  std::string first_bad;
  auto expect = [&](bool ok, const Cell& c, const char* what) {
    ++entries;
    if (ok) return;
    if (mismatches++ == 0)
      first_bad = std::string(to_string(c.kind)) + "/" + std::string(to_string(c.role)) + " " + what;
  };
  for (const Cell& c : cells) {
    const std::size_t r = c.role == LayerRole::Input ? 0 : c.role == LayerRole::Output ? 1 : 2;
    const ScalingLaws laws = mup_laws(c.kind, c.role, c.role != LayerRole::Output);
    expect(laws.init_std.restricted_to(c.role) == one, c, "init");
    expect(laws.weight_mult.restricted_to(c.role) == multiplier[r].restricted_to(c.role), c, "multiplier");
    expect(laws.lr_mult.has_value() == c.lr.has_value() &&
               (!c.lr || laws.lr_mult->restricted_to(c.role) == c.lr->restricted_to(c.role)),
           c, "lr");
    expect(laws.eps_mult.restricted_to(c.role) == mono(-1, 1, 0, 1).restricted_to(c.role), c, "eps");
    expect(laws.wd_mult.restricted_to(c.role) == mono(0, 1, 1, 1).restricted_to(c.role), c, "wd");

    // Numeric rules at several widths agree with the symbolic cell exactly.
    for (std::size_t n : {64u, 256u, 1024u}) {
      const LayerSpec s = c.role == LayerRole::Input    ? LayerSpec{16, n, c.role, false, true}
                          : c.role == LayerRole::Output ? LayerSpec{n, 4, c.role, true, false}
                                                        : LayerSpec{n, n, c.role, true, true};
      const ScalingRule rule = derive_rule(c.kind, s, ParamScheme::MuP);
      const double dn = static_cast<double>(n);
      const double want_mult = c.role == LayerRole::Input ? 1.0 : c.role == LayerRole::Output ? 1.0 / dn : 1.0 / std::sqrt(dn);
      expect(rule.init_std == 1.0 && rule.weight_mult == want_mult, c, "numeric init/multiplier");
      expect(rule.eps_mult == (c.role == LayerRole::Output ? 1.0 : 1.0 / dn), c, "numeric eps");
      expect(rule.wd_mult == (c.role == LayerRole::Input ? 1.0 : dn), c, "numeric wd");
      if (c.lr) expect(rule.lr_mult == c.lr->restricted_to(c.role).evaluate(effective_dims(s)), c, "numeric lr");
    }
  }
  return {mismatches == 0, std::to_string(entries) + " entries, " + std::to_string(mismatches) + " mismatches" +
                               (first_bad.empty() ? "" : " (first: " + first_bad + ")")};
}

// ---------------------------------------------------------------------------

Outcome spectral_init() {
  double lo = 1e300, hi = 0.0;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    for (std::size_t w : kWidths) {
      const Mlp m = build(mlp_specs(16, w, 4, 4), ParamScheme::MuP, OptimizerKind::AdamW, seed, Activation::ReLU);
      for (const SpectralProbe& p : spectral_probe(m, m)) {
        lo = std::min(lo, p.ratio_w);
        hi = std::max(hi, p.ratio_w);
      }
    }
  }
  return {lo >= 0.5 && hi <= 2.5, "ratio range [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

// ---------------------------------------------------------------------------

Outcome spectral_update() {
  std::mt19937_64 rng(505);
  const Matrix x = randn(16, 1, rng), y = randn(4, 1, rng);
  HyperParams hp;
  hp.eta = 0.01;
  bool ok = true;
  std::ostringstream detail;
  for (OptimizerKind kind : kAllKinds) {
    std::vector<double> lo(4, 1e300), hi(4, 0.0);
    double muon_dev = 0.0, lamb_dev = 0.0;
    for (std::size_t w : kWidths) {
      Mlp m = build(mlp_specs(16, w, 4, 4), ParamScheme::MuP, kind, 7, Activation::Identity);
      const std::vector<ScalingRule> rules = derive_rules(m, kind, ParamScheme::MuP);
      const Grads g = gradients(m, x, y, LossKind::MSE);
      OptState st = init_state(m, kind, hp);
      if (kind == OptimizerKind::Sophia) {
        std::mt19937_64 hrng(9);
        update_hessian_ema(st, estimate_hessian_diag(m, x, y, LossKind::MSE, hrng), hp.beta2);
      }
      // ADOPT's first call only seeds its second moment.
      if (kind == OptimizerKind::Adopt) step(kind, m, g, st, hp, rules, {.measure = false});
      const Mlp before = m;
      step(kind, m, g, st, hp, rules, {.measure = false});
      const std::vector<SpectralProbe> probes = spectral_probe(before, m);
      for (std::size_t l = 0; l < probes.size(); ++l) {
        lo[l] = std::min(lo[l], probes[l].ratio_dw);
        hi[l] = std::max(hi[l], probes[l].ratio_dw);
        if (kind == OptimizerKind::Muon && probes[l].role == LayerRole::Hidden)
          muon_dev = std::max(muon_dev, std::abs(probes[l].ratio_dw / hp.eta - 1.0));
        if (kind == OptimizerKind::Lamb) {
          const double rel = frobenius_norm(m.effective_weight(l) - before.effective_weight(l)) /
                             frobenius_norm(before.effective_weight(l));
          const double want = hp.eta * rules[l].lr_mult;
          lamb_dev = std::max(lamb_dev, std::abs(rel - want) / want);
        }
      }
    }
    double band = 0.0;
    for (std::size_t l = 0; l < 4; ++l) band = std::max(band, lo[l] > 0.0 ? hi[l] / lo[l] : INFINITY);
    bool kind_ok = band <= 8.0;
    detail << to_string(kind) << " band " << fmt(band);
    if (kind == OptimizerKind::Muon) {
      kind_ok = kind_ok && muon_dev <= 1e-2;
      detail << " (hidden |ratio/eta-1| " << fmt(muon_dev) << ")";
    }
    if (kind == OptimizerKind::Lamb) {
      kind_ok = kind_ok && lamb_dev <= 1e-10;
      detail << " (rel frob dev " << fmt(lamb_dev) << ")";
    }
    detail << "; ";
    ok = ok && kind_ok;
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------

Outcome shampoo_closed_form() {
  std::mt19937_64 rng(606);
  HyperParams hp;
  hp.eta = 0.1;
  hp.beta1 = hp.beta2 = hp.eps = hp.weight_decay = hp.delta = 0.0;
  const std::vector<ScalingRule> unit{ScalingRule{}};
  std::vector<std::pair<std::size_t, std::size_t>> shapes{{256, 128}, {128, 256}, {1, 1}};
  while (shapes.size() < 10)
    shapes.emplace_back(std::uniform_int_distribution<std::size_t>(1, 256)(rng),
                        std::uniform_int_distribution<std::size_t>(1, 128)(rng));
  double worst = 0.0;
  for (auto [r, c] : shapes) {
    const Matrix u = randn(r, 1, rng), v = randn(c, 1, rng);
    const Matrix g = matmul_nt(u, v);
    const LayerSpec s{c, r, LayerRole::Hidden, true, true};
    Mlp m({Layer{s, Matrix(r, c), 1.0}}, Activation::Identity);
    OptState st = init_state(m, OptimizerKind::Shampoo, hp);
    const auto rep = step_shampoo(m, Grads{{g}, {}}, st, hp, unit, {.measure = false, .keep_updates = true});
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(g), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd oracle = svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
    const Eigen::MatrixXd got = to_eigen(rep.layers[0].delta) / -hp.eta;
    worst = std::max(worst, (got - oracle).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, "10 shapes, max |dir - UV^T| = " + fmt(worst)};
}

// ---------------------------------------------------------------------------

Outcome adamw_sign() {
  std::mt19937_64 rng(707);
  HyperParams hp;
  hp.eta = 0.03;
  hp.beta1 = hp.beta2 = hp.eps = hp.weight_decay = 0.0;
  std::size_t bad = 0, total = 0;
  for (std::size_t w : {8u, 64u, 256u}) {
    Mlp m = build(mlp_specs(16, w, 4, 3), ParamScheme::MuP, OptimizerKind::AdamW, w, Activation::Tanh);
    const std::vector<ScalingRule> rules = derive_rules(m, OptimizerKind::AdamW, ParamScheme::MuP);
    const Grads g = gradients(m, randn(16, 4, rng), randn(4, 4, rng), LossKind::MSE);
    OptState st = init_state(m, OptimizerKind::AdamW, hp);
    const auto rep = step_adamw(m, g, st, hp, rules, {.measure = false, .keep_updates = true});
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      const auto gv = g.weights[l].values();
      const auto dv = rep.layers[l].delta.values();
      for (std::size_t k = 0; k < gv.size(); ++k) {
        ++total;
        const double sign = gv[k] > 0.0 ? 1.0 : gv[k] < 0.0 ? -1.0 : 0.0;
        if (dv[k] != -hp.eta * rules[l].lr_mult * sign) ++bad;
      }
    }
  }
  return {bad == 0, std::to_string(total) + " coordinates, " + std::to_string(bad) + " differ"};
}

// ---------------------------------------------------------------------------

constexpr double kCoordCheckLr = 0.0625;

Outcome coord_check_contrast() {
  const TaskData task = make_task(ExperimentConfig{});
  CoordCheckSpec spec;
  spec.widths = kWidths;
  spec.depth = 4;
  spec.steps = 5;
  spec.seed = 0;
  spec.hp.eta = kCoordCheckLr;

  spec.scheme = ParamScheme::MuP;
  std::map<std::size_t, std::map<std::size_t, double>> peak;  // layer -> width -> max rel
  bool diverged = false;
  for (const CoordCheckRecord& r : coordinate_check(spec, task)) {
    diverged = diverged || r.diverged;
    double& p = peak[r.layer][r.width];
    p = std::max(p, r.rel_to_first);
  }
  double spread = 0.0;
  for (const auto& [layer, by_width] : peak) {
    double lo = 1e300, hi = 0.0;
    for (const auto& [w, v] : by_width) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    spread = std::max(spread, hi / lo);
  }

  spec.scheme = ParamScheme::SP;
  std::vector<double> final_out;
  for (const CoordCheckRecord& r : coordinate_check(spec, task))
    if (r.layer == spec.depth && r.step == spec.steps) final_out.push_back(r.rel_to_first);
  bool monotone = final_out.size() == kWidths.size();
  for (std::size_t i = 1; monotone && i < final_out.size(); ++i) monotone = final_out[i] > final_out[i - 1];
  const double growth = final_out.empty() ? 0.0 : final_out.back() / final_out.front();

  std::string sp;
  for (double v : final_out) sp += (sp.empty() ? "" : ", ") + fmt(v);
  return {!diverged && spread <= 4.0 && monotone && growth >= 2.0,
          "lr " + fmt(kCoordCheckLr) + "; muP max spread " + fmt(spread) + "; SP output final [" + sp + "] growth " +
              fmt(growth)};
}

// ---------------------------------------------------------------------------

std::string indices(const std::vector<BestLr>& best) {
  std::string s;
  for (const BestLr& b : best) s += (s.empty() ? "" : ",") + std::to_string(b.grid_index);
  return s;
}

Outcome lr_transfer() {
  bool ok = true;
  std::ostringstream detail;
  for (OptimizerKind kind : {OptimizerKind::AdamW, OptimizerKind::Sophia}) {
    for (ParamScheme scheme : {ParamScheme::MuP, ParamScheme::SP}) {
      ExperimentConfig cfg;
      cfg.optimizer = kind;
      cfg.scheme = scheme;
      const TaskData task = make_task(cfg);
      const std::vector<BestLr> best = best_lr_per_width(run_lr_sweep(cfg, task, threads_from_env()), cfg.lr_grid);
      bool cell_ok = best.size() == cfg.widths.size();
      if (cell_ok && scheme == ParamScheme::MuP) {
        for (std::size_t i = 1; i < best.size(); ++i)
          cell_ok = cell_ok && std::abs(static_cast<long>(best[i].grid_index) - static_cast<long>(best[i - 1].grid_index)) <= 1;
      } else if (cell_ok) {
        cell_ok = std::abs(static_cast<long>(best.back().grid_index) - static_cast<long>(best.front().grid_index)) >= 2;
      }
      detail << to_string(kind) << "/" << to_string(scheme) << " argmin idx [" << indices(best) << "]"
             << (cell_ok ? "" : " x") << "; ";
      ok = ok && cell_ok;
    }
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> explicit_hessian(const Mlp& mlp, const Matrix& x, const Matrix& y, LossKind kind) {
  const std::vector<double> p0 = flatten_weights(mlp);
  Mlp scratch = mlp;
  auto grad = [&](const std::vector<double>& p) {
    unflatten_weights(scratch, p);
    return flatten(gradients(scratch, x, y, kind).weights);
  };
  const double h = 1e-5;
  std::vector<std::vector<double>> hess(p0.size(), std::vector<double>(p0.size()));
  for (std::size_t j = 0; j < p0.size(); ++j) {
    std::vector<double> pp = p0, pm = p0;
    pp[j] += h;
    pm[j] -= h;
    const auto gp = grad(pp), gm = grad(pm);
    for (std::size_t i = 0; i < p0.size(); ++i) hess[i][j] = (gp[i] - gm[i]) / (2 * h);
  }
  return hess;
}

Outcome hutchinson_accuracy() {
  std::mt19937_64 rng(1010);
  std::size_t checked = 0, bad = 0, beyond_5sd = 0;
  double worst = 0.0;
  struct Net {
    std::size_t width, depth;
    Activation act;
    LossKind kind;
  };
  const Net nets[] = {{4, 2, Activation::Tanh, LossKind::MSE},
                      {8, 3, Activation::Tanh, LossKind::MSE},
                      {6, 3, Activation::ReLU, LossKind::SoftmaxCE},
                      {8, 2, Activation::Identity, LossKind::SoftmaxCE},
                      {5, 4, Activation::Tanh, LossKind::SoftmaxCE}};
  for (const Net& n : nets) {
    const Mlp m = build(mlp_specs(3, n.width, 3, n.depth), ParamScheme::MuP, OptimizerKind::Sophia, rng(), n.act);
    // finite differences are meaningless across a ReLU kink
    Matrix x = randn(3, 8, rng);
    while (near_relu_kink(m, x, 1e-2)) x = randn(3, 8, rng);
    Matrix y = randn(3, 8, rng);
    if (n.kind == LossKind::SoftmaxCE) {
      y = Matrix(1, 8);
      for (double& t : y.values()) t = static_cast<double>(std::uniform_int_distribution<int>(0, 2)(rng));
    }
    const auto hess = explicit_hessian(m, x, y, n.kind);
    std::mt19937_64 probe_rng(rng());
    const std::vector<double> est = flatten(estimate_hessian_diag(m, x, y, n.kind, probe_rng, 100));
    std::vector<std::size_t> layer_of;
    for (std::size_t l = 0; l < m.depth(); ++l) layer_of.insert(layer_of.end(), m.layer(l).weight.size(), l);
    for (std::size_t i = 0; i < est.size(); ++i) {
      if (std::abs(hess[i][i]) <= 1e-3) continue;
      ++checked;
      // standard error of the 100-probe mean
      double off = 0.0;
      for (std::size_t j = 0; j < est.size(); ++j)
        if (j != i && layer_of[j] == layer_of[i]) off += hess[i][j] * hess[i][j];
      if (std::abs(est[i] - hess[i][i]) > 5.0 * std::sqrt(off / 100.0) + 1e-5) ++beyond_5sd;
      const double rel = std::abs(est[i] - hess[i][i]) / std::abs(hess[i][i]);
      worst = std::max(worst, rel);
      if (rel > 0.10) ++bad;
    }
  }
  return {bad == 0 && checked > 0, std::to_string(checked) + " coordinates with |diag| > 1e-3, " + std::to_string(bad) +
                                       " outside 10%, worst " + fmt(100.0 * worst) + "%; " +
                                       std::to_string(beyond_5sd) + " beyond 5 standard errors"};
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome sweep_determinism() {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "mup_acceptance_determinism";
  std::filesystem::create_directories(dir);
  const std::string base = std::string(MUP_CLI_PATH) +
                           " lr-sweep --widths 32,64,128 --lr-grid 0.25,0.0625,0.015625 --seeds 0,1 --steps 100"
                           " --optimizer sophia --out ";
  std::vector<std::string> outputs;
  for (const char* threads : {"4", "4", "1"}) {
    const std::filesystem::path out = dir / ("run" + std::to_string(outputs.size()) + ".csv");
    const std::string cmd = "MUP_THREADS=" + std::string(threads) + " " + base + out.string() + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
    outputs.push_back(slurp(out));
  }
  std::filesystem::remove_all(dir);
  const bool repeat = !outputs[0].empty() && outputs[0] == outputs[1];
  const bool serial = outputs[0] == outputs[2];
  return {repeat && serial, std::string("MUP_THREADS=4 repeat ") + (repeat ? "identical" : "differs") +
                                ", vs sequential " + (serial ? "identical" : "differs") + " (" +
                                std::to_string(outputs[0].size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  const std::vector<Criterion> all{
      {1, "rank-1 gradients", 5, rank_one_gradients},
      {2, "gradient exactness", 30, gradient_exactness},
      {3, "scaling table fidelity", 1, table_fidelity},
      {4, "spectral init", 60, spectral_init},
      {5, "spectral update", 120, spectral_update},
      {6, "shampoo closed form", 10, shampoo_closed_form},
      {7, "adamw sign degenerate case", 1, adamw_sign},
      {8, "coordinate-check contrast", 300, coord_check_contrast},
      {9, "lr transfer", 1200, lr_transfer},
      {10, "hutchinson estimator", 30, hutchinson_accuracy},
      {11, "sweep determinism", 300, sweep_determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failures;
    std::printf("%s criterion %d: %s | %s | %.1fs (budget %.0fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.budget_s, in_budget ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

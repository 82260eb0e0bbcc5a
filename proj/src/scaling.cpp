#include "mup/scaling.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mup/error.hpp"
#include "mup/text.hpp"

namespace mup {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::AdamW: return "adamw";
    case OptimizerKind::Adopt: return "adopt";
    case OptimizerKind::Lamb: return "lamb";
    case OptimizerKind::Sophia: return "sophia";
    case OptimizerKind::Shampoo: return "shampoo";
    case OptimizerKind::Muon: return "muon";
  }
  return "?";
}

std::string_view to_string(ParamScheme scheme) {
  return scheme == ParamScheme::SP ? "sp" : "mup";
}

OptimizerKind parse_optimizer(std::string_view name) {
  const std::string n = to_lower(trim(name));
  for (auto k : {OptimizerKind::AdamW, OptimizerKind::Adopt, OptimizerKind::Lamb, OptimizerKind::Sophia,
                 OptimizerKind::Shampoo, OptimizerKind::Muon}) {
    if (n == to_string(k)) return k;
  }
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "'");
}

ParamScheme parse_scheme(std::string_view name) {
  const std::string n = to_lower(trim(name));
  if (n == "sp") return ParamScheme::SP;
  if (n == "mup") return ParamScheme::MuP;
  throw InvalidArgument("unknown scheme '" + std::string(name) + "' (expected sp or mup)");
}

EffectiveDims effective_dims(const LayerSpec& layer) {
  validate(layer);
  return {layer.width_scaled_out ? layer.fan_out : 1, layer.width_scaled_in ? layer.fan_in : 1};
}

Rational::Rational(long n, long d) {
  if (d == 0) throw InvalidArgument("Rational: zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const long g = std::gcd(n, d);
  num = g == 0 ? 0 : n / g;
  den = g == 0 ? 1 : d / g;
}

namespace {

double power(std::size_t n, Rational e) {
  const double base = static_cast<double>(n);
  if (e.num == 0 || n == 1) return 1.0;
  if (e.den == 1) return std::pow(base, static_cast<double>(e.num));
  if (e.den == 2) {
    // sqrt is correctly rounded; keeps e.g. 1/sqrt(512) bit-identical to the closed form.
    const double root = std::sqrt(base);
    return e.num > 0 ? std::pow(root, static_cast<double>(e.num))
                     : 1.0 / std::pow(root, static_cast<double>(-e.num));
  }
  return std::pow(base, e.value());
}

std::string rational_text(Rational r) {
  if (r.den == 1) return std::to_string(r.num);
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

}  // namespace

double Monomial::evaluate(EffectiveDims dims) const {
  return power(dims.out, out_exp) * power(dims.in, in_exp);
}

Monomial Monomial::restricted_to(LayerRole role) const {
  Monomial m = *this;
  if (role == LayerRole::Input) m.in_exp = Rational(0);
  if (role == LayerRole::Output) m.out_exp = Rational(0);
  return m;
}

std::string Monomial::to_string() const {
  if (out_exp.num == 0 && in_exp.num == 0) return "1";
  std::string s;
  if (out_exp.num != 0) s += "n_out^" + rational_text(out_exp);
  if (in_exp.num != 0) s += (s.empty() ? "" : "*") + std::string("n_in^") + rational_text(in_exp);
  return s;
}

ScalingLaws mup_laws(OptimizerKind kind, LayerRole role, bool fan_out_at_least_fan_in) {
  ScalingLaws laws;
  laws.init_std = Monomial{};
  // (1/sqrt(n_in)) * min{1, sqrt(n_out/n_in)}
  laws.weight_mult = fan_out_at_least_fan_in ? Monomial{Rational(0), Rational(-1, 2)}
                                             : Monomial{Rational(1, 2), Rational(-1)};
  switch (kind) {
    case OptimizerKind::AdamW:
    case OptimizerKind::Adopt:
    case OptimizerKind::Sophia:
      laws.lr_mult = Monomial{Rational(0), Rational(-1)};
      break;
    case OptimizerKind::Lamb:
      laws.lr_mult = Monomial{};
      break;
    case OptimizerKind::Shampoo:
      laws.lr_mult = Monomial{Rational(1, 2), Rational(-1, 2)};
      break;
    case OptimizerKind::Muon:
      if (role == LayerRole::Hidden) laws.lr_mult = Monomial{};
      break;
  }
  laws.eps_mult = Monomial{Rational(-1), Rational(0)};
  laws.wd_mult = Monomial{Rational(0), Rational(1)};
  return laws;
}

ScalingRule derive_rule(OptimizerKind kind, const LayerSpec& layer, ParamScheme scheme) {
  validate(layer);
  if (scheme == ParamScheme::SP) {
    ScalingRule rule;
    rule.init_std = 1.0 / std::sqrt(static_cast<double>(layer.fan_in));
    return rule;
  }
  const EffectiveDims dims = effective_dims(layer);
  const OptimizerKind stepped_by =
      (kind == OptimizerKind::Muon && layer.role != LayerRole::Hidden) ? OptimizerKind::AdamW : kind;
  const ScalingLaws laws = mup_laws(stepped_by, layer.role, dims.out >= dims.in);
  ScalingRule rule;
  rule.init_std = laws.init_std.evaluate(dims);
  rule.weight_mult = laws.weight_mult.evaluate(dims);
  rule.lr_mult = laws.lr_mult->evaluate(dims);
  rule.eps_mult = laws.eps_mult.evaluate(dims);
  rule.wd_mult = laws.wd_mult.evaluate(dims);
  return rule;
}

std::string rule_table(OptimizerKind kind, std::span<const std::size_t> widths, std::size_t depth,
                       ParamScheme scheme, std::size_t input_dim, std::size_t output_dim) {
  if (widths.empty()) throw InvalidArgument("rule_table: no widths");
  std::ostringstream out;
  out << "optimizer\tscheme\twidth\tlayer\trole\tfan_in\tfan_out\tinit_std\tweight_mult\tlr_mult\teps_mult"
         "\twd_mult\n";
  for (std::size_t width : widths) {
    const auto specs = mlp_specs(input_dim, width, output_dim, depth);
    for (std::size_t l = 0; l < specs.size(); ++l) {
      const ScalingRule r = derive_rule(kind, specs[l], scheme);
      out << to_string(kind) << '\t' << to_string(scheme) << '\t' << width << '\t' << (l + 1) << '\t'
          << to_string(specs[l].role) << '\t' << specs[l].fan_in << '\t' << specs[l].fan_out << '\t'
          << format_number(r.init_std) << '\t' << format_number(r.weight_mult) << '\t'
          << format_number(r.lr_mult) << '\t' << format_number(r.eps_mult) << '\t'
          << format_number(r.wd_mult) << '\n';
    }
  }
  return out.str();
}

}  // namespace mup
